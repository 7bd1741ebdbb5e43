#include "qpgl/potential.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qpgl/rng.hpp"

namespace qpgl {

namespace {

MultiIndex negated(const MultiIndex& k) {
    MultiIndex m(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) m[i] = -k[i];
    return m;
}

}  // namespace

PotentialModel::PotentialModel(const BlockStructure& bs, std::map<MultiIndex, std::complex<double>> coeffs,
                               double rho, int k_cut)
    : coeffs_(std::move(coeffs)), rho_(rho), k_cut_(k_cut), b_(bs.b) {
    if (!(rho_ > 0.0)) throw std::invalid_argument("PotentialModel: rho must be positive");
    if (k_cut_ < 1) throw std::invalid_argument("PotentialModel: k_cut must be positive");
    // drop exact zeros so the support is the stored set
    for (auto it = coeffs_.begin(); it != coeffs_.end();) {
        if (it->second == std::complex<double>(0.0, 0.0))
            it = coeffs_.erase(it);
        else
            ++it;
    }
    validate();
}

void PotentialModel::validate() const {
    const MultiIndex zero(static_cast<std::size_t>(b_), 0);
    for (const auto& [k, v] : coeffs_) {
        if (static_cast<int>(k.size()) != b_)
            throw std::invalid_argument("PotentialModel: coefficient index has wrong length");
        if (k == zero) throw std::invalid_argument("PotentialModel: mean must vanish (V_0 = 0)");
        if (sup_norm(k) > k_cut_)
            throw std::invalid_argument("PotentialModel: coefficient outside the k_cut support");
        if (std::abs(v) > std::exp(-rho_ * sup_norm(k)))
            throw std::invalid_argument("PotentialModel: |V_k| <= e^{-rho|k|} violated at " + to_string(k));
        auto it = coeffs_.find(negated(k));
        if (it == coeffs_.end() || it->second != std::conj(v))
            throw std::invalid_argument("PotentialModel: conjugate symmetry violated at " + to_string(k));
    }
}

PotentialModel PotentialModel::from_named_model(const std::string& name, const BlockStructure& bs,
                                                const NamedModelParams& params) {
    std::map<MultiIndex, std::complex<double>> c;
    if (name == "separable-cosine" || name == "two-cosine-surace") {
        if (name == "two-cosine-surace" && bs.b != 2)
            throw std::invalid_argument("two-cosine-surace: requires b = 2");
        for (int j = 0; j < bs.b; ++j) {
            MultiIndex e(static_cast<std::size_t>(bs.b), 0);
            e[static_cast<std::size_t>(j)] = 1;
            c[e] = 0.5;
            c[negated(e)] = 0.5;
        }
        return PotentialModel(bs, std::move(c), params.rho, std::max(params.k_cut, 1));
    }
    if (name == "random-analytic") {
        CounterRng rng(params.seed, 0x706F74ULL);
        // draw the lexicographically positive half and mirror the conjugates
        const MultiIndex zero(static_cast<std::size_t>(bs.b), 0);
        MultiIndex k(static_cast<std::size_t>(bs.b), -params.k_cut);
        for (;;) {
            if (k > zero) {
                const double r = std::exp(-params.rho * sup_norm(k)) * (1.0 - 1e-12);
                const auto v = rng.disk(r);
                c[k] = v;
                c[negated(k)] = std::conj(v);
            }
            int j = bs.b - 1;
            while (j >= 0 && k[static_cast<std::size_t>(j)] == params.k_cut) k[static_cast<std::size_t>(j--)] = -params.k_cut;
            if (j < 0) break;
            ++k[static_cast<std::size_t>(j)];
        }
        return PotentialModel(bs, std::move(c), params.rho, params.k_cut);
    }
    throw std::invalid_argument("from_named_model: unknown model \"" + name + "\"");
}

std::complex<double> PotentialModel::coefficient(const MultiIndex& k) const {
    auto it = coeffs_.find(k);
    return it == coeffs_.end() ? std::complex<double>(0.0, 0.0) : it->second;
}

double PotentialModel::evaluate(const Eigen::VectorXd& theta) const {
    if (theta.size() != b_) throw std::invalid_argument("PotentialModel::evaluate: wrong theta length");
    std::complex<double> s = 0.0;
    for (const auto& [k, v] : coeffs_) {
        double phase = 0.0;
        for (int j = 0; j < b_; ++j) phase += k[static_cast<std::size_t>(j)] * theta[j];
        s += v * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    if (std::abs(s.imag()) > 1e-12 * static_cast<double>(std::max<std::size_t>(coeffs_.size(), 1)))
        throw std::runtime_error("PotentialModel::evaluate: imaginary part above tolerance");
    return s.real();
}

DecayCheck PotentialModel::verify_decay(double rho) const {
    if (!(rho > 0.0)) throw std::invalid_argument("verify_decay: rho must be positive");
    DecayCheck out;
    for (const auto& [k, v] : coeffs_) {
        const double excess = std::abs(v) * std::exp(rho * sup_norm(k));
        if (excess > out.worst_excess) {
            out.worst_excess = excess;
            out.worst_index = k;
        }
    }
    out.ok = out.worst_excess <= 1.0;
    return out;
}

double PotentialModel::l1_norm() const {
    double s = 0.0;
    for (const auto& [k, v] : coeffs_) s += std::abs(v);
    return s;
}

double PotentialModel::l2_norm() const {
    double s = 0.0;
    for (const auto& [k, v] : coeffs_) s += std::norm(v);
    return std::sqrt(s);
}

double PotentialModel::tail_bound() const {
    // shell of radius m in Z^b has (2m+1)^b - (2m-1)^b points
    double s = 0.0;
    for (int m = k_cut_ + 1;; ++m) {
        const double shell = std::pow(2.0 * m + 1.0, b_) - std::pow(2.0 * m - 1.0, b_);
        const double term = shell * std::exp(-rho_ * m);
        s += term;
        if (term < 1e-300 || term < 1e-18 * s) break;
    }
    return s;
}

void PotentialModel::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("PotentialModel::save: cannot open " + path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", rho_);
    f << "# qpgl-potential b=" << b_ << " rho=" << buf << " k_cut=" << k_cut_ << "\n";
    for (const auto& [k, v] : coeffs_) {
        for (int j = 0; j < b_; ++j) f << k[static_cast<std::size_t>(j)] << " ";
        std::snprintf(buf, sizeof buf, "%.17g", v.real());
        f << buf << " ";
        std::snprintf(buf, sizeof buf, "%.17g", v.imag());
        f << buf << "\n";
    }
}

PotentialModel PotentialModel::load(const std::string& path, const BlockStructure& bs) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("PotentialModel::load: cannot open " + path);
    std::string header;
    std::getline(f, header);
    int b = 0, k_cut = 0;
    double rho = 0.0;
    if (std::sscanf(header.c_str(), "# qpgl-potential b=%d rho=%lg k_cut=%d", &b, &rho, &k_cut) != 3)
        throw std::runtime_error("PotentialModel::load: bad header in " + path);
    if (b != bs.b) throw std::runtime_error("PotentialModel::load: block structure mismatch");
    std::map<MultiIndex, std::complex<double>> c;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        MultiIndex k(static_cast<std::size_t>(b));
        for (int j = 0; j < b; ++j)
            if (!(is >> k[static_cast<std::size_t>(j)]))
                throw std::runtime_error("PotentialModel::load: bad index line: " + line);
        double re = 0.0, im = 0.0;
        if (!(is >> re >> im)) throw std::runtime_error("PotentialModel::load: bad value line: " + line);
        c[k] = {re, im};
    }
    return PotentialModel(bs, std::move(c), rho, k_cut);
}

}  // namespace qpgl
