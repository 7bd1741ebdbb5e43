#include "qpgl/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "qpgl/instances.hpp"
#include "qpgl/msa_checks.hpp"
#include "qpgl/resonance.hpp"

namespace qpgl {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

struct CommonCtx {
    BlockStructure bs;
    PotentialModel v;
    ScaleSchedule sched;
};

const Json& need_key(const Json& doc, const std::string& key) {
    if (!doc.contains(key)) throw std::invalid_argument("config: missing key '" + key + "'");
    return doc.at(key);
}

CommonCtx parse_common(const SweepConfig& cfg) {
    const Json& doc = cfg.doc;
    BlockStructure bs(need_key(doc, "blocks").get<std::vector<int>>());

    const Json pot = doc.value("potential", Json::object());
    NamedModelParams mp;
    mp.rho = pot.value("rho", 0.5);
    if (!(mp.rho > 0.0 && mp.rho < 1.0))
        throw std::invalid_argument("config: potential.rho must lie in (0, 1)");
    mp.k_cut = pot.value("k_cut", 1);
    mp.seed = pot.value("seed", cfg.seed);
    PotentialModel v = pot.contains("file")
                           ? PotentialModel::load(pot.at("file").get<std::string>(), bs)
                           : PotentialModel::from_named_model(pot.value("model", "separable-cosine"), bs, mp);

    ScaleSchedule sched;
    const Json sch = doc.value("schedule", Json::object());
    sched.c1 = sch.value("c1", 0.2);
    sched.c2 = sch.value("c2", 0.3);
    sched.c3 = sch.value("c3", 0.6);
    sched.c4 = sch.value("c4", 0.9);
    sched.C = sch.value("C", 4.0);
    sched.N0 = sch.value("N0", 3);
    sched.eps = sch.value("eps", 1e-8);
    sched.n1_override = sch.value("n1_override", 0);
    sched.validate();
    return {std::move(bs), std::move(v), sched};
}

std::vector<double> scalar_grid(const Json& g, CounterRng& rng, const std::string& key) {
    std::vector<double> out;
    if (g.is_number()) {
        out.push_back(g.get<double>());
    } else if (g.is_array()) {
        out = g.get<std::vector<double>>();
    } else if (g.is_object() && g.contains("values")) {
        out = g.at("values").get<std::vector<double>>();
    } else if (g.is_object() && g.contains("linspace")) {
        const auto v = g.at("linspace").get<std::vector<double>>();
        if (v.size() != 3 || v[2] < 1) throw std::invalid_argument("config: bad linspace at '" + key + "'");
        const int n = static_cast<int>(v[2]);
        for (int i = 0; i < n; ++i)
            out.push_back(n == 1 ? v[0] : v[0] + (v[1] - v[0]) * i / static_cast<double>(n - 1));
    } else if (g.is_object() && g.contains("sample")) {
        const int n = g.at("sample").get<int>();
        const double lo = g.value("low", 0.0), hi = g.value("high", 1.0);
        for (int i = 0; i < n; ++i) out.push_back(rng.uniform(lo, hi));
    } else {
        throw std::invalid_argument("config: bad scalar grid at '" + key + "'");
    }
    if (out.empty()) throw std::invalid_argument("config: empty grid at '" + key + "'");
    return out;
}

std::vector<Eigen::VectorXd> vector_grid(const Json& g, int dim, CounterRng& rng, const std::string& key) {
    std::vector<Eigen::VectorXd> out;
    auto from_array = [&](const Json& arr) {
        if (!arr.is_array() || static_cast<int>(arr.size()) != dim)
            throw std::invalid_argument("config: expected a length-" + std::to_string(dim) + " vector at '" +
                                        key + "'");
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) v[i] = arr.at(static_cast<std::size_t>(i)).get<double>();
        return v;
    };
    if (g.is_array() && !g.empty() && g.at(0).is_number()) {
        out.push_back(from_array(g));
    } else if (g.is_array()) {
        for (const auto& a : g) out.push_back(from_array(a));
    } else if (g.is_object() && g.contains("values")) {
        for (const auto& a : g.at("values")) out.push_back(from_array(a));
    } else if (g.is_object() && g.contains("sample")) {
        const int n = g.at("sample").get<int>();
        const double lo = g.value("low", 0.0), hi = g.value("high", 1.0);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd v(dim);
            for (int j = 0; j < dim; ++j) v[j] = rng.uniform(lo, hi);
            out.push_back(std::move(v));
        }
    } else {
        throw std::invalid_argument("config: bad vector grid at '" + key + "'");
    }
    if (out.empty()) throw std::invalid_argument("config: empty grid at '" + key + "'");
    return out;
}

std::vector<int> int_list(const Json& g, const std::string& key) {
    std::vector<int> out;
    if (g.is_number_integer()) out.push_back(g.get<int>());
    else if (g.is_array()) out = g.get<std::vector<int>>();
    else throw std::invalid_argument("config: bad integer list at '" + key + "'");
    if (out.empty()) throw std::invalid_argument("config: empty grid at '" + key + "'");
    return out;
}

std::vector<Restriction> parse_tags(const Json& g, int b, const std::string& key) {
    std::vector<Restriction> tags(static_cast<std::size_t>(b), Restriction::None);
    if (g.is_string() && (g.get<std::string>() == "full")) return tags;
    if (!g.is_array() || static_cast<int>(g.size()) != b)
        throw std::invalid_argument("config: expected " + std::to_string(b) + " tags at '" + key + "'");
    for (int i = 0; i < b; ++i) {
        const std::string t = g.at(static_cast<std::size_t>(i)).get<std::string>();
        if (t == "none" || t == "full") tags[static_cast<std::size_t>(i)] = Restriction::None;
        else if (t == "neg") tags[static_cast<std::size_t>(i)] = Restriction::RemoveNegative;
        else if (t == "pos") tags[static_cast<std::size_t>(i)] = Restriction::RemovePositive;
        else throw std::invalid_argument("config: unknown tag '" + t + "' at '" + key + "'");
    }
    return tags;
}

void push_field(TaskOutcome& t, const std::string& name, const std::string& v) {
    t.fields.emplace_back(name, v);
}
void push_real(TaskOutcome& t, const std::string& name, double v) { push_field(t, name, format_real(v)); }
void push_int(TaskOutcome& t, const std::string& name, long long v) {
    push_field(t, name, std::to_string(v));
}
void push_bool(TaskOutcome& t, const std::string& name, bool v) { push_field(t, name, v ? "true" : "false"); }
void push_vector(TaskOutcome& t, const std::string& base, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) push_real(t, base + "_" + std::to_string(i), v[i]);
}
void vector_columns(std::vector<std::string>& cols, const std::string& base, int n) {
    for (int i = 0; i < n; ++i) cols.push_back(base + "_" + std::to_string(i));
}

std::vector<TaskOutcome> run_tasks(int count, int workers, const std::function<TaskOutcome(int)>& fn) {
    std::vector<TaskOutcome> out(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                out[static_cast<std::size_t>(i)] = fn(i);
            } catch (const std::exception& e) {
                out[static_cast<std::size_t>(i)] = TaskOutcome{};
                out[static_cast<std::size_t>(i)].status = e.what();
            }
        }
    };
    const int w = std::max(1, std::min(workers, count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (int t = 0; t < w; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

std::string provenance_line(const SweepConfig& cfg, const std::string& sub) {
    return "# qpgl " + std::string(kVersion) + " subcommand=" + sub + " digest=" + cfg.digest +
           " seed=" + std::to_string(cfg.seed);
}

void write_outputs(const SweepConfig& cfg, const SweepResult& res, const std::string& detail_header) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream f(fs::path(cfg.out_dir) / (res.subcommand + ".csv"), std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output CSV in " + cfg.out_dir);
        f << provenance_line(cfg, res.subcommand) << "\r\n";
        for (std::size_t i = 0; i < res.columns.size(); ++i) f << (i ? "," : "") << csv_escape(res.columns[i]);
        f << ",status\r\n";
        for (const auto& r : res.records) {
            for (std::size_t c = 0; c < res.columns.size(); ++c) {
                std::string v;
                for (const auto& [k, val] : r.fields)
                    if (k == res.columns[c]) {
                        v = val;
                        break;
                    }
                f << (c ? "," : "") << csv_escape(v);
            }
            f << "," << csv_escape(r.status) << "\r\n";
        }
    }
    {
        Json out;
        out["provenance"] = {{"version", kVersion}, {"digest", cfg.digest}, {"seed", cfg.seed},
                             {"subcommand", res.subcommand}};
        out["summary"] = res.summary;
        Json records = Json::array();
        for (const auto& r : res.records) {
            Json rec;
            for (const auto& [k, v] : r.fields) rec[k] = v;
            rec["status"] = r.status;
            records.push_back(std::move(rec));
        }
        out["records"] = std::move(records);
        std::ofstream f(fs::path(cfg.out_dir) / (res.subcommand + ".json"), std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output JSON in " + cfg.out_dir);
        f << out.dump(2) << "\n";
    }
    if (!detail_header.empty()) {
        std::ofstream f(fs::path(cfg.out_dir) / (res.subcommand + "-detail.csv"), std::ios::binary);
        if (!f) throw std::runtime_error("cannot open detail CSV in " + cfg.out_dir);
        f << provenance_line(cfg, res.subcommand) << "\r\n" << detail_header << "\r\n";
        for (const auto& r : res.records)
            for (const auto& row : r.detail_rows) f << row << "\r\n";
    }
}

// ---------------------------------------------------------------- assemble

SweepResult run_assemble(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("assemble", Json::object());
    CounterRng grid_rng(cfg.seed, 0x67726964ULL);
    const int n = sub.value("N", 2);
    const auto tags = parse_tags(sub.value("region", Json("full")), ctx.bs.b, "assemble.region");
    const Region region = enumerate_region(
        ctx.bs, RegionDescriptor(MultiIndex(static_cast<std::size_t>(ctx.bs.b), 0), n, tags));
    const auto thetas = vector_grid(need_key(sub, "theta"), ctx.bs.d, grid_rng, "assemble.theta");
    const auto omegas = vector_grid(need_key(sub, "omega"), ctx.bs.b, grid_rng, "assemble.omega");
    const auto epss = scalar_grid(sub.value("eps", Json(0.0)), grid_rng, "assemble.eps");

    SweepResult res;
    res.subcommand = "assemble";
    res.columns = {"task", "N"};
    vector_columns(res.columns, "theta", ctx.bs.d);
    vector_columns(res.columns, "omega", ctx.bs.b);
    res.columns.insert(res.columns.end(), {"eps", "points", "file"});

    const int count = static_cast<int>(thetas.size() * omegas.size() * epss.size());
    std::filesystem::create_directories(cfg.out_dir);
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        const int ei = i % static_cast<int>(epss.size());
        const int oi = (i / static_cast<int>(epss.size())) % static_cast<int>(omegas.size());
        const int ti = i / static_cast<int>(epss.size() * omegas.size());
        const DualMatrix hm = assemble(ctx.bs, region, thetas[static_cast<std::size_t>(ti)],
                                       omegas[static_cast<std::size_t>(oi)],
                                       epss[static_cast<std::size_t>(ei)], ctx.v);
        const std::string file = "assemble_task" + std::to_string(i) + ".txt";
        dump_matrix(hm.h, (std::filesystem::path(cfg.out_dir) / file).string());
        push_int(t, "task", i);
        push_int(t, "N", n);
        push_vector(t, "theta", thetas[static_cast<std::size_t>(ti)]);
        push_vector(t, "omega", omegas[static_cast<std::size_t>(oi)]);
        push_real(t, "eps", epss[static_cast<std::size_t>(ei)]);
        push_int(t, "points", region.size());
        push_field(t, "file", file);
        return t;
    });
    res.summary = {{"tasks", count}, {"points", region.size()}};
    return res;
}

// ------------------------------------------------------------------- green

SweepResult run_green(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("green", Json::object());
    CounterRng grid_rng(cfg.seed, 0x67726964ULL);
    const auto ns = int_list(need_key(sub, "N"), "green.N");
    const auto thetas = vector_grid(need_key(sub, "theta"), ctx.bs.d, grid_rng, "green.theta");
    const auto omegas = vector_grid(need_key(sub, "omega"), ctx.bs.b, grid_rng, "green.omega");
    const auto energies = scalar_grid(need_key(sub, "E"), grid_rng, "green.E");
    const auto epss = scalar_grid(sub.value("eps", Json(0.0)), grid_rng, "green.eps");
    const bool dump = sub.value("dump", false);

    SweepResult res;
    res.subcommand = "green";
    res.columns = {"task", "N"};
    vector_columns(res.columns, "theta", ctx.bs.d);
    vector_columns(res.columns, "omega", ctx.bs.b);
    res.columns.insert(res.columns.end(), {"E", "eps", "op_norm", "sigma_min", "near_singular", "fit_rate",
                                           "fit_intercept", "fit_residual", "fit_pairs", "ldt_pass"});

    const long dims[5] = {static_cast<long>(ns.size()), static_cast<long>(thetas.size()),
                          static_cast<long>(omegas.size()), static_cast<long>(energies.size()),
                          static_cast<long>(epss.size())};
    const int count = static_cast<int>(dims[0] * dims[1] * dims[2] * dims[3] * dims[4]);
    if (dump) std::filesystem::create_directories(cfg.out_dir);
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        long rem = i;
        const long ei = rem % dims[4]; rem /= dims[4];
        const long Ei = rem % dims[3]; rem /= dims[3];
        const long oi = rem % dims[2]; rem /= dims[2];
        const long ti = rem % dims[1]; rem /= dims[1];
        const long ni = rem;
        const int n = ns[static_cast<std::size_t>(ni)];
        const Region region = origin_cube(ctx.bs, n);
        const DualMatrix hm =
            assemble(ctx.bs, region, thetas[static_cast<std::size_t>(ti)],
                     omegas[static_cast<std::size_t>(oi)], epss[static_cast<std::size_t>(ei)], ctx.v);
        const double E = energies[static_cast<std::size_t>(Ei)];
        const GreenResult gr = green(hm, E, n, ctx.v.rho(), dump);
        push_int(t, "task", i);
        push_int(t, "N", n);
        push_vector(t, "theta", thetas[static_cast<std::size_t>(ti)]);
        push_vector(t, "omega", omegas[static_cast<std::size_t>(oi)]);
        push_real(t, "E", E);
        push_real(t, "eps", epss[static_cast<std::size_t>(ei)]);
        push_real(t, "op_norm", gr.report.op_norm);
        push_real(t, "sigma_min", gr.report.sigma_min);
        push_bool(t, "near_singular", gr.report.near_singular);
        push_real(t, "fit_rate", gr.report.fit.rate);
        push_real(t, "fit_intercept", gr.report.fit.intercept);
        push_real(t, "fit_residual", gr.report.fit.residual);
        push_int(t, "fit_pairs", gr.report.fit.pairs);
        push_bool(t, "ldt_pass", gr.report.ldt_pass);
        if (dump && gr.inverse) {
            const Eigen::MatrixXcd shifted =
                hm.h - E * Eigen::MatrixXcd::Identity(region.size(), region.size());
            dump_matrix(shifted, (std::filesystem::path(cfg.out_dir) / ("green_h_task" + std::to_string(i) + ".txt")).string());
            dump_matrix(*gr.inverse, (std::filesystem::path(cfg.out_dir) / ("green_G_task" + std::to_string(i) + ".txt")).string());
        }
        return t;
    });

    long pass = 0;
    for (const auto& r : res.records)
        for (const auto& [k, v] : r.fields)
            if (k == "ldt_pass" && v == "true") ++pass;
    res.summary = {{"tasks", count}, {"ldt_pass", pass}};
    return res;
}

// ---------------------------------------------------------------- ldt-scan

SweepResult run_ldt_scan(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("ldt-scan", Json::object());
    CounterRng grid_rng(cfg.seed, 0x67726964ULL);
    const auto ns = int_list(need_key(sub, "N"), "ldt-scan.N");
    const int samples = sub.value("samples", 100);
    const double theta_box = sub.value("theta_box", 5.0);
    const auto energies = scalar_grid(sub.value("E", Json(0.3)), grid_rng, "ldt-scan.E");

    SweepResult res;
    res.subcommand = "ldt-scan";
    res.columns = {"task", "N", "sample", "E", "delta", "eps"};
    vector_columns(res.columns, "theta", ctx.bs.d);
    vector_columns(res.columns, "omega", ctx.bs.b);
    res.columns.insert(res.columns.end(), {"op_norm", "norm_bound", "pass_bounds", "ldt_pass"});

    const int per_n = static_cast<int>(energies.size()) * samples;
    const int count = static_cast<int>(ns.size()) * per_n;
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        const int ni = i / per_n;
        const int rem = i % per_n;
        const int Ei = rem / samples;
        const int si = rem % samples;
        const int n = ns[static_cast<std::size_t>(ni)];
        const double E = energies[static_cast<std::size_t>(Ei)];
        const FirstStepRegime regime = first_step_regime(n, ctx.sched.c1, ctx.bs.b, ctx.sched.C);
        CounterRng rng(cfg.seed, 1000 + static_cast<std::uint64_t>(i));
        const Eigen::VectorXd omega = sample_omega(ctx.bs, rng);
        const Eigen::VectorXd theta =
            sample_theta_outside(ctx.bs, n, regime.delta, E, omega, theta_box, rng);
        const Region region = origin_cube(ctx.bs, n);
        const DualMatrix hm = assemble(ctx.bs, region, theta, omega, regime.eps, ctx.v);
        const GreenResult gr = green(hm, E, n, ctx.v.rho(), /*want_inverse=*/false);
        // perturbative-regime bounds: ||G|| <= 2/delta with decay 2/delta e^{-rho d}
        const double cap = 2.0 / regime.delta;
        bool ok = !gr.report.near_singular && gr.report.op_norm <= cap;
        if (ok)
            for (std::size_t d = 0; d < gr.report.profile.size(); ++d)
                if (gr.report.profile[d] > cap * std::exp(-ctx.v.rho() * static_cast<double>(d))) {
                    ok = false;
                    break;
                }
        push_int(t, "task", i);
        push_int(t, "N", n);
        push_int(t, "sample", si);
        push_real(t, "E", E);
        push_real(t, "delta", regime.delta);
        push_real(t, "eps", regime.eps);
        push_vector(t, "theta", theta);
        push_vector(t, "omega", omega);
        push_real(t, "op_norm", gr.report.op_norm);
        push_real(t, "norm_bound", cap);
        push_bool(t, "pass_bounds", ok);
        push_bool(t, "ldt_pass", gr.report.ldt_pass);
        return t;
    });

    Json rates = Json::object();
    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        long pass = 0, total = 0;
        for (int i = static_cast<int>(ni) * per_n; i < static_cast<int>(ni + 1) * per_n; ++i) {
            ++total;
            for (const auto& [k, v] : res.records[static_cast<std::size_t>(i)].fields)
                if (k == "pass_bounds" && v == "true") ++pass;
        }
        rates[std::to_string(ns[ni])] = static_cast<double>(pass) / static_cast<double>(total);
    }
    res.summary = {{"tasks", count}, {"pass_rate", rates}};
    return res;
}

// ------------------------------------------------------- resonance-measure

SweepResult run_resonance_measure(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("resonance-measure", Json::object());
    const int count = sub.value("count", 50);
    const auto n_range = sub.value("N", std::vector<int>{0, 4});
    const auto delta_range = sub.value("delta", std::vector<double>{1e-4, 0.2});
    const auto e_range = sub.value("E", std::vector<double>{-1.0, 8.0});
    if (n_range.size() != 2 || delta_range.size() != 2 || e_range.size() != 2)
        throw std::invalid_argument("config: resonance-measure ranges need [lo, hi]");

    SweepResult res;
    res.subcommand = "resonance-measure";
    res.columns = {"j"};
    vector_columns(res.columns, "theta_section", std::max(ctx.bs.d - 1, 0));
    res.columns.insert(res.columns.end(), {"N", "delta", "E", "measure", "bound4"});

    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        CounterRng rng(cfg.seed, 1000 + static_cast<std::uint64_t>(i));
        const int n = static_cast<int>(rng.uniform_int(n_range[0], n_range[1]));
        const double delta =
            std::exp(rng.uniform(std::log(delta_range[0]), std::log(delta_range[1])));
        const double E = rng.uniform(e_range[0], e_range[1]);
        const Eigen::VectorXd omega = sample_omega(ctx.bs, rng);
        const int j = static_cast<int>(rng.uniform_int(0, ctx.bs.d - 1));
        Eigen::VectorXd rest(ctx.bs.d - 1);
        for (Eigen::Index r = 0; r < rest.size(); ++r) rest[r] = rng.uniform(-5.0, 5.0);
        const ResonanceSpec spec(ctx.bs, n, delta, E, omega);
        const double measure = section_measure(j, rest, spec);
        const double bound = 4.0 * std::pow(2.0 * n + 1.0, ctx.bs.b) * std::sqrt(delta);
        push_int(t, "j", j);
        push_vector(t, "theta_section", rest);
        push_int(t, "N", n);
        push_real(t, "delta", delta);
        push_real(t, "E", E);
        push_real(t, "measure", measure);
        push_real(t, "bound4", bound);
        return t;
    });

    long violations = 0;
    for (const auto& r : res.records) {
        double measure = 0, bound = 0;
        for (const auto& [k, v] : r.fields) {
            if (k == "measure") measure = std::stod(v);
            if (k == "bound4") bound = std::stod(v);
        }
        if (measure > bound) ++violations;
    }
    res.summary = {{"tasks", count}, {"bound_violations", violations}};
    return res;
}

// -------------------------------------------------------- double-resonance

SweepResult run_double_resonance(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("double-resonance", Json::object());
    CounterRng grid_rng(cfg.seed, 0x67726964ULL);
    const int omega_count = sub.value("omega_count", 100);
    const int divisions = sub.value("divisions", 1);
    const double delta0 = sub.value("delta0", 0.0);  // 0 = first_step_delta at N1
    const int n = sub.value("N", 8);
    const auto thetas = vector_grid(sub.value("theta", Json::array({0.3})), ctx.bs.d, grid_rng,
                                    "double-resonance.theta");
    const double E = sub.value("E", 0.7);

    SweepResult res;
    res.subcommand = "double-resonance";
    res.columns = {"task", "division", "delta", "omega_index"};
    vector_columns(res.columns, "omega", ctx.bs.b);
    res.columns.insert(res.columns.end(), {"N", "N1", "success", "M", "candidates_tried"});

    const int count = divisions * omega_count;
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        const int div = i / omega_count;
        const int w = i % omega_count;
        // the same frequency across divisions, so the per-omega outcome is
        // comparable as delta shrinks
        CounterRng omega_rng(cfg.seed, 5000 + static_cast<std::uint64_t>(w));
        const Eigen::VectorXd omega_v = sample_omega(ctx.bs, omega_rng);
        const Frequency omega(ctx.bs, omega_v);
        const double base =
            delta0 > 0.0 ? delta0 : first_step_delta(ctx.sched.N1(n), ctx.sched.c1, ctx.bs.b, ctx.sched.C);
        const double delta = base / std::pow(10.0, div);
        const DoubleResonanceScan scan =
            double_resonance_scan(thetas[0], E, omega, n, ctx.sched, ctx.bs, delta);
        push_int(t, "task", i);
        push_int(t, "division", div);
        push_real(t, "delta", delta);
        push_int(t, "omega_index", w);
        push_vector(t, "omega", omega_v);
        push_int(t, "N", n);
        push_int(t, "N1", scan.N1);
        push_bool(t, "success", scan.M.has_value());
        push_int(t, "M", scan.M ? *scan.M : -1);
        push_int(t, "candidates_tried", static_cast<long long>(scan.records.size()));
        for (const auto& rec : scan.records) {
            std::ostringstream row;
            row << i << "," << rec.M << "," << rec.annulus_size << "," << rec.failures << ","
                << (rec.first_failure ? csv_escape(to_string(*rec.first_failure)) : "");
            t.detail_rows.push_back(row.str());
        }
        return t;
    });

    Json rates = Json::array();
    bool non_decreasing = true;
    double prev = -1.0;
    for (int div = 0; div < divisions; ++div) {
        long succ = 0;
        for (int w = 0; w < omega_count; ++w) {
            const auto& r = res.records[static_cast<std::size_t>(div * omega_count + w)];
            for (const auto& [k, v] : r.fields)
                if (k == "success" && v == "true") ++succ;
        }
        const double rate = static_cast<double>(succ) / static_cast<double>(omega_count);
        if (prev >= 0.0 && rate < prev) non_decreasing = false;
        prev = rate;
        rates.push_back(rate);
    }
    res.summary = {{"tasks", count}, {"success_rate", rates}, {"non_decreasing", non_decreasing}};
    return res;
}

// ------------------------------------------------------------ cartan-probe

SweepResult run_cartan_probe(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("cartan-probe", Json::object());
    CounterRng grid_rng(cfg.seed, 0x67726964ULL);
    const int n_tilde = sub.value("n_tilde", 6);
    const int n1 = sub.value("n1", 2);
    const int lambda_n = sub.value("lambda_n", 4);
    const int lambda_bar_n = sub.value("lambda_bar_n", 0);
    const int j = sub.value("j", 0);
    const double E = sub.value("E", 0.5);
    const double eps = sub.value("eps", 1e-4);
    const long samples = sub.value("samples", 200);
    const auto thetas = vector_grid(sub.value("theta", Json::array({0.3})), ctx.bs.d, grid_rng,
                                    "cartan-probe.theta");
    const auto omegas = vector_grid(need_key(sub, "omega"), ctx.bs.b, grid_rng, "cartan-probe.omega");

    const Region lambda = origin_cube(ctx.bs, lambda_n);
    const Region lambda_bar = origin_cube(ctx.bs, lambda_bar_n);

    SweepResult res;
    res.subcommand = "cartan-probe";
    res.columns = {"task"};
    vector_columns(res.columns, "theta", ctx.bs.d);
    vector_columns(res.columns, "omega", ctx.bs.b);
    res.columns.insert(res.columns.end(),
                       {"n_tilde", "n1", "samples", "bad", "estimate", "wilson_lo", "wilson_hi",
                        "interval_length", "threshold"});

    const int count = static_cast<int>(thetas.size() * omegas.size());
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        const int oi = i % static_cast<int>(omegas.size());
        const int ti = i / static_cast<int>(omegas.size());
        CounterRng rng(cfg.seed, 1000 + static_cast<std::uint64_t>(i));
        const Frequency omega(ctx.bs, omegas[static_cast<std::size_t>(oi)]);
        const CartanProbe probe =
            cartan_probe(ctx.bs, lambda, lambda_bar, thetas[static_cast<std::size_t>(ti)], j, E, omega,
                         eps, ctx.v, n_tilde, n1, samples, rng);
        push_int(t, "task", i);
        push_vector(t, "theta", thetas[static_cast<std::size_t>(ti)]);
        push_vector(t, "omega", omegas[static_cast<std::size_t>(oi)]);
        push_int(t, "n_tilde", n_tilde);
        push_int(t, "n1", n1);
        push_int(t, "samples", probe.samples);
        push_int(t, "bad", probe.bad);
        push_real(t, "estimate", probe.estimate);
        push_real(t, "wilson_lo", probe.wilson_lo);
        push_real(t, "wilson_hi", probe.wilson_hi);
        push_real(t, "interval_length", probe.interval_length);
        push_real(t, "threshold", probe.threshold);
        for (const auto& s : probe.trace) {
            std::ostringstream row;
            row << i << "," << format_real(s.y) << "," << format_real(s.norm) << ","
                << (s.is_bad ? "true" : "false");
            t.detail_rows.push_back(row.str());
        }
        return t;
    });
    res.summary = {{"tasks", count}};
    return res;
}

// --------------------------------------------------------- coupling-verify

SweepResult run_coupling_verify(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("coupling-verify", Json::object());
    const std::string which = sub.value("lemma", "all");
    const int instances = sub.value("instances", 50);
    const int n = sub.value("N", 8);
    const int patch_radius = sub.value("patch_radius", 3);
    const double eps = sub.value("eps", 1e-3);
    const double rho_bar = sub.value("rho_bar", ctx.v.rho());
    const double c_user = sub.value("C_user", 1.0);
    const double pert_scale = sub.value("pert_scale", 1.0);

    std::vector<std::string> lemmas;
    if (which == "all") lemmas = {"perturbation", "norm", "decay"};
    else lemmas = {which};

    SweepResult res;
    res.subcommand = "coupling-verify";
    res.columns = {"task", "lemma", "instance", "hypotheses_hold", "conclusions_hold", "scale_regime_ok",
                   "margin_norm", "margin_decay", "C_eff", "note"};

    const int count = static_cast<int>(lemmas.size()) * instances;
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        const int li = i / instances;
        const int inst = i % instances;
        const std::string& lemma = lemmas[static_cast<std::size_t>(li)];
        const std::uint64_t seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(inst);
        CheckReport rep;
        if (lemma == "perturbation") {
            const PerturbationInstance pi =
                make_perturbation_instance(ctx.bs, ctx.v, std::min(n, 6), rho_bar, seed, pert_scale);
            rep = verify_perturbation_bound(pi.region, pi.a, pi.b, pi.rho_bar, pi.scale_n);
        } else if (lemma == "norm") {
            const CouplingInstance ci =
                make_coupling_norm_instance(ctx.bs, ctx.v, n, patch_radius, eps, seed);
            rep = verify_coupling_norm(ctx.bs, ci.lambda, ci.energy, ci.theta, ci.omega, ci.eps, ctx.v,
                                       ci.covering, ci.m0, ci.m1, rho_bar);
        } else if (lemma == "decay") {
            const CouplingInstance ci = make_coupling_decay_instance(ctx.bs, ctx.v, n, patch_radius, eps,
                                                                     seed, inst % 5 == 0);
            rep = verify_coupling_decay(ctx.bs, ci.lambda, ci.lambda1, ci.energy, ci.theta, ci.omega,
                                        ci.eps, ctx.v, ci.covering, ci.m0, rho_bar, ci.scale_n, c_user);
        } else {
            throw std::invalid_argument("config: unknown lemma '" + lemma + "'");
        }
        push_int(t, "task", i);
        push_field(t, "lemma", lemma);
        push_int(t, "instance", inst);
        push_bool(t, "hypotheses_hold", rep.hypotheses_hold);
        push_bool(t, "conclusions_hold", rep.conclusions_hold);
        push_bool(t, "scale_regime_ok", rep.scale_regime_ok);
        push_real(t, "margin_norm", rep.margins.count("norm") ? rep.margins.at("norm") : 0.0);
        push_real(t, "margin_decay", rep.margins.count("decay") ? rep.margins.at("decay")
                                     : rep.margins.count("assert") ? rep.margins.at("assert")
                                                                   : 0.0);
        push_real(t, "C_eff", rep.margins.count("C_eff") ? rep.margins.at("C_eff") : 0.0);
        push_field(t, "note", rep.notes.empty() ? "" : rep.notes.front());
        return t;
    });

    long gated = 0, asserted = 0;
    for (const auto& r : res.records) {
        bool hyp = false, con = false;
        for (const auto& [k, v] : r.fields) {
            if (k == "hypotheses_hold" && v == "true") hyp = true;
            if (k == "conclusions_hold" && v == "true") con = true;
        }
        if (hyp) ++gated;
        if (hyp && con) ++asserted;
    }
    res.summary = {{"tasks", count}, {"gated", gated}, {"asserted_and_hold", asserted}};
    return res;
}

// ----------------------------------------------------------------- witness

SweepResult run_witness(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("witness", Json::object());
    const auto ns = sub.value("N", std::vector<int>{8, 12, 16});
    const int instances = sub.value("instances", 1);
    const double poly_c = sub.value("poly_C", 1.0);
    const double poly_degree = sub.value("poly_degree", 5.0 * ctx.bs.b);
    const double theta_box = sub.value("theta_box", 3.0);

    SweepResult res;
    res.subcommand = "witness";
    res.columns = {"task", "instance", "N", "E"};
    vector_columns(res.columns, "theta", ctx.bs.d);
    res.columns.insert(res.columns.end(), {"eps", "delta_gate", "min_gap", "rhs_bound", "threshold",
                                           "pass", "used_neumann", "refused"});

    const int per_inst = static_cast<int>(ns.size());
    const int count = instances * per_inst;
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        const int inst = i / per_inst;
        const int ni = i % per_inst;
        const int n = ns[static_cast<std::size_t>(ni)];
        // one seeded draw per instance, shared across the N list so the
        // boundary sums are comparable; the energy is placed in a spectral
        // gap wide enough for every scale's norm gate
        CounterRng rng(cfg.seed, 7000 + static_cast<std::uint64_t>(inst));
        const GateInstance gi = sample_gate_instance(ctx.bs, ns, theta_box, 0.05, 2.0, rng);
        const Eigen::VectorXd& omega = gi.omega;
        const Eigen::VectorXd& theta = gi.theta;
        const double E = gi.energy;
        const FirstStepRegime regime = first_step_regime(n, ctx.sched.c1, ctx.bs.b, ctx.sched.C);
        const double eps = sub.contains("eps") ? sub.at("eps").get<double>() : regime.eps;
        const WitnessReport rep =
            absence_witness(ctx.bs, n, E, theta, omega, eps, ctx.v, PolyBound{poly_c, poly_degree});
        push_int(t, "task", i);
        push_int(t, "instance", inst);
        push_int(t, "N", n);
        push_real(t, "E", E);
        push_vector(t, "theta", theta);
        push_real(t, "eps", eps);
        push_real(t, "delta_gate", rep.delta_gate);
        push_real(t, "min_gap", rep.min_gap);
        push_real(t, "rhs_bound", rep.rhs_bound);
        push_real(t, "threshold", rep.threshold);
        push_bool(t, "pass", rep.pass);
        push_bool(t, "used_neumann", rep.used_neumann);
        push_bool(t, "refused", rep.refused);
        if (rep.refused) t.status = rep.refusal;
        return t;
    });

    bool all_pass = true, monotone = true;
    for (int inst = 0; inst < instances; ++inst) {
        double prev = std::numeric_limits<double>::infinity();
        for (int ni = 0; ni < per_inst; ++ni) {
            const auto& r = res.records[static_cast<std::size_t>(inst * per_inst + ni)];
            double rhs = 0;
            bool pass = false;
            for (const auto& [k, v] : r.fields) {
                if (k == "rhs_bound") rhs = std::stod(v);
                if (k == "pass" && v == "true") pass = true;
            }
            if (!pass) all_pass = false;
            if (rhs >= prev) monotone = false;
            prev = rhs;
        }
    }
    res.summary = {{"tasks", count}, {"all_pass", all_pass}, {"rhs_monotone_decreasing", monotone}};
    return res;
}

// ----------------------------------------------------------------- duality

SweepResult run_duality(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("duality", Json::object());
    const int instances = sub.value("instances", 20);
    const int cube_n = sub.value("cube_n", 3);
    const double eps = sub.value("eps", 1e-3);
    const int x_count = sub.value("x_count", 12);

    SweepResult res;
    res.subcommand = "duality";
    res.columns = {"task", "E", "residual", "interior", "boundary", "tail", "psi_max", "within_budget",
                   "conjugation_gap"};

    res.records = run_tasks(instances, cfg.workers, [&](int i) {
        TaskOutcome t;
        const std::uint64_t seed = cfg.seed * 16807ULL + static_cast<std::uint64_t>(i);
        const DualitySample ds = make_bloch_sample(ctx.bs, ctx.v, cube_n, eps, seed, x_count);
        const DualityReport rep = duality_residual(ctx.bs, ds.sample, ds.omega, ds.eps, ctx.v);
        CounterRng rng(seed, 0x7265ULL);
        const double K = rng.uniform(1.0, 10.0);
        const double lam = ds.eps * K * K;
        const double gap = rescale_conjugation_gap(ctx.bs, ds.sample.support,
                                                   ds.sample.theta_momentum * K, ds.omega, lam, K, ctx.v);
        push_int(t, "task", i);
        push_real(t, "E", ds.sample.energy);
        push_real(t, "residual", rep.residual);
        push_real(t, "interior", rep.interior_term);
        push_real(t, "boundary", rep.boundary_term);
        push_real(t, "tail", rep.tail_term);
        push_real(t, "psi_max", rep.psi_max);
        push_bool(t, "within_budget", rep.within_budget);
        push_real(t, "conjugation_gap", gap);
        return t;
    });

    bool all = true;
    double max_gap = 0.0;
    for (const auto& r : res.records)
        for (const auto& [k, v] : r.fields) {
            if (k == "within_budget" && v != "true") all = false;
            if (k == "conjugation_gap") max_gap = std::max(max_gap, std::stod(v));
        }
    res.summary = {{"tasks", instances}, {"all_within_budget", all}, {"max_conjugation_gap", max_gap}};
    return res;
}

// ----------------------------------------------------------- spectrum-window

SweepResult run_spectrum_window(const SweepConfig& cfg, const CommonCtx& ctx) {
    const Json sub = cfg.doc.value("spectrum-window", Json::object());
    CounterRng grid_rng(cfg.seed, 0x67726964ULL);
    const auto energies = scalar_grid(sub.value("E", Json::array({0.0, 1.0, 5.0})), grid_rng,
                                      "spectrum-window.E");
    const double eps = sub.value("eps", 0.3);
    const int n = sub.value("N", 10);
    const double halfwidth = sub.value("grid_halfwidth", 0.2);
    const double step = sub.value("grid_step", 0.05);
    const auto omegas = vector_grid(sub.contains("omega") ? sub.at("omega") : Json({{"sample", 1},
                                                                                    {"low", 0.0},
                                                                                    {"high", 2.0 * M_PI}}),
                                    ctx.bs.b, grid_rng, "spectrum-window.omega");

    const Region lambda = origin_cube(ctx.bs, n);

    SweepResult res;
    res.subcommand = "spectrum-window";
    res.columns = {"task", "E", "eps", "min_dist", "bound", "grid_term", "trunc_term", "pass"};
    vector_columns(res.columns, "best_theta", ctx.bs.d);

    const int count = static_cast<int>(energies.size() * omegas.size());
    res.records = run_tasks(count, cfg.workers, [&](int i) {
        TaskOutcome t;
        const int Ei = i % static_cast<int>(energies.size());
        const int oi = i / static_cast<int>(energies.size());
        const double E = energies[static_cast<std::size_t>(Ei)];
        // 1-D grid along the first momentum axis through the sphere radius
        std::vector<Eigen::VectorXd> grid;
        const double center = std::sqrt(std::max(E, 0.0));
        const int steps = static_cast<int>(std::floor(2.0 * halfwidth / step + 0.5));
        for (int s = 0; s <= steps; ++s) {
            Eigen::VectorXd th = Eigen::VectorXd::Zero(ctx.bs.d);
            th[0] = center - halfwidth + s * step;
            grid.push_back(std::move(th));
        }
        const WindowReport rep =
            spectral_window_check(ctx.bs, E, lambda, omegas[static_cast<std::size_t>(oi)], eps, ctx.v, grid);
        push_int(t, "task", i);
        push_real(t, "E", E);
        push_real(t, "eps", eps);
        push_real(t, "min_dist", rep.min_dist);
        push_real(t, "bound", rep.bound);
        push_real(t, "grid_term", rep.grid_term);
        push_real(t, "trunc_term", rep.trunc_term);
        push_bool(t, "pass", rep.pass);
        push_vector(t, "best_theta", rep.best_theta);
        return t;
    });

    bool all = true;
    for (const auto& r : res.records)
        for (const auto& [k, v] : r.fields)
            if (k == "pass" && v != "true") all = false;
    res.summary = {{"tasks", count}, {"all_pass", all}};
    return res;
}

// ---------------------------------------------------------------- selftest

Eigen::MatrixXcd gauss_inverse(Eigen::MatrixXcd a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXcd inv = Eigen::MatrixXcd::Identity(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        Eigen::Index pivot = c;
        for (Eigen::Index r = c + 1; r < n; ++r)
            if (std::abs(a(r, c)) > std::abs(a(pivot, c))) pivot = r;
        if (std::abs(a(pivot, c)) == 0.0) throw std::runtime_error("gauss_inverse: singular matrix");
        if (pivot != c) {
            a.row(pivot).swap(a.row(c));
            inv.row(pivot).swap(inv.row(c));
        }
        const std::complex<double> d = a(c, c);
        a.row(c) /= d;
        inv.row(c) /= d;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (r == c) continue;
            const std::complex<double> f = a(r, c);
            if (f == std::complex<double>(0.0, 0.0)) continue;
            a.row(r) -= f * a.row(c);
            inv.row(r) -= f * inv.row(c);
        }
    }
    return inv;
}

SweepResult run_selftest(const SweepConfig& cfg, const CommonCtx& ctx) {
    SweepResult res;
    res.subcommand = "selftest";
    res.columns = {"check", "pass", "detail"};

    struct Check {
        std::string name;
        std::function<std::pair<bool, std::string>()> fn;
    };
    const BlockStructure& bs = ctx.bs;
    const PotentialModel& v = ctx.v;
    std::vector<Check> checks;

    checks.push_back({"elementary-region-count", [&] {
        bool ok = true;
        for (int b : {1, 2, 3}) {
            std::vector<int> blocks(static_cast<std::size_t>(b), 1);
            const BlockStructure s(blocks);
            const auto regions = elementary_regions_at_scale(2, s);
            const int expect = static_cast<int>(std::pow(3.0, b)) - 2 * b;
            ok = ok && static_cast<int>(regions.size()) == expect;
        }
        return std::pair{ok, std::string("3^b - 2b descriptors")};
    }});

    checks.push_back({"region-enumeration", [&] {
        const BlockStructure s(std::vector<int>{2});
        const Region cube = origin_cube(s, 1);
        const RegionDescriptor quad(MultiIndex{0, 0}, 1,
                                    {Restriction::RemoveNegative, Restriction::RemoveNegative});
        const Region r = enumerate_region(s, quad);
        return std::pair{cube.size() == 9 && r.size() == 4, std::string("cube 9, quarter 4")};
    }});

    checks.push_back({"potential-evaluate", [&] {
        CounterRng rng(cfg.seed, 11);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Eigen::VectorXd th(bs.b);
            for (int i = 0; i < bs.b; ++i) th[i] = rng.uniform(0.0, 2.0 * M_PI);
            // direct trigonometric form of the separable model
            double direct = 0.0;
            for (int i = 0; i < bs.b; ++i) direct += std::cos(th[i]);
            worst = std::max(worst, std::abs(v.evaluate(th) - direct));
        }
        return std::pair{worst < 1e-10, "max deviation " + format_real(worst)};
    }});

    checks.push_back({"green-oracle", [&] {
        CounterRng rng(cfg.seed, 12);
        double worst = 0.0;
        for (int t = 0; t < 5; ++t) {
            const Eigen::VectorXd omega = sample_omega(bs, rng);
            Eigen::VectorXd theta(bs.d);
            for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-2.0, 2.0);
            const Region region = origin_cube(bs, 3);
            const DualMatrix hm = assemble(bs, region, theta, omega, 0.05, v);
            const double E = 0.4;
            const GreenResult gr = green(hm, E, 3, v.rho());
            if (gr.report.near_singular) continue;
            const Eigen::MatrixXcd oracle = gauss_inverse(
                hm.h - E * Eigen::MatrixXcd::Identity(region.size(), region.size()));
            const double rel = (*gr.inverse - oracle).cwiseAbs().maxCoeff() /
                               oracle.cwiseAbs().maxCoeff();
            worst = std::max(worst, rel);
        }
        return std::pair{worst < 1e-9, "max relative error " + format_real(worst)};
    }});

    checks.push_back({"green-identity", [&] {
        CounterRng rng(cfg.seed, 13);
        const Eigen::VectorXd omega = sample_omega(bs, rng);
        const Region region = origin_cube(bs, 3);
        Eigen::VectorXd theta(bs.d);
        for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-2.0, 2.0);
        const DualMatrix hm = assemble(bs, region, theta, omega, 0.05, v);
        const GreenResult gr = green(hm, 0.4, 3, v.rho());
        if (gr.report.near_singular) return std::pair{false, std::string("near singular")};
        const Eigen::MatrixXcd shifted =
            hm.h - 0.4 * Eigen::MatrixXcd::Identity(region.size(), region.size());
        const double resid = (shifted * *gr.inverse -
                              Eigen::MatrixXcd::Identity(region.size(), region.size()))
                                 .cwiseAbs()
                                 .maxCoeff();
        return std::pair{resid < 1e-10, "solve residual " + format_real(resid)};
    }});

    checks.push_back({"section-closed-form", [&] {
        const BlockStructure s(std::vector<int>{2});
        const ResonanceSpec spec(s, 0, 0.01, 1.0, Eigen::VectorXd::Zero(2));
        const double m = section_measure(0, Eigen::VectorXd(0), spec);
        const double expect = 2.0 * (std::sqrt(1.01) - std::sqrt(0.99));
        return std::pair{std::abs(m - expect) < 1e-14, "measure " + format_real(m)};
    }});

    checks.push_back({"section-bound", [&] {
        CounterRng rng(cfg.seed, 14);
        bool ok = true;
        for (int t = 0; t < 50; ++t) {
            const int n = static_cast<int>(rng.uniform_int(0, 4));
            const double delta = std::exp(rng.uniform(std::log(1e-4), std::log(0.2)));
            const double E = rng.uniform(-1.0, 6.0);
            const Eigen::VectorXd omega = sample_omega(bs, rng);
            const ResonanceSpec spec(bs, n, delta, E, omega);
            Eigen::VectorXd rest(bs.d - 1);
            for (Eigen::Index r = 0; r < rest.size(); ++r) rest[r] = rng.uniform(-5.0, 5.0);
            const double m = section_measure(0, rest, spec);
            if (m > 4.0 * std::pow(2.0 * n + 1.0, bs.b) * std::sqrt(delta)) ok = false;
        }
        return std::pair{ok, std::string("50 seeded specs")};
    }});

    checks.push_back({"first-step-delta", [&] {
        const double got = first_step_delta(5, 0.2, 2, 4.0);
        // independent route through logs
        const double expect = std::exp(-2.0 * std::exp(0.2 * std::log(5.0)) - 2.0 * std::log(4.0) -
                                       4.0 * std::log(11.0));
        const bool mono = first_step_delta(6, 0.2, 2, 4.0) < got;
        return std::pair{std::abs(got - expect) <= 1e-15 * expect && mono,
                         "delta(5) = " + format_real(got)};
    }});

    checks.push_back({"double-resonance-reverify", [&] {
        CounterRng rng(cfg.seed, 15);
        const Eigen::VectorXd omega_v = sample_omega(bs, rng);
        const Frequency omega(bs, omega_v);
        ScaleSchedule sched = ctx.sched;
        sched.n1_override = 2;
        Eigen::VectorXd theta(bs.d);
        for (int i = 0; i < bs.d; ++i) theta[i] = 0.3;
        const DoubleResonanceScan scan = double_resonance_scan(theta, 0.7, omega, 6, sched, bs, 0.0);
        if (!scan.M) return std::pair{false, std::string("no M found")};
        // hand re-verification of the returned annulus
        const ResonanceSpec spec(bs, scan.N1, scan.delta, 0.7, omega_v);
        const int M = *scan.M;
        const int inner = static_cast<int>(std::floor(std::pow(M, 1.0 / (10.0 * bs.b))));
        bool ok = true;
        MultiIndex k(static_cast<std::size_t>(bs.b), -M);
        do {
            if (sup_norm(k) <= inner) continue;
            if (in_resonance(theta + block_dot(bs, k, omega_v), spec).in_set) ok = false;
        } while ([&] {
            int j = static_cast<int>(k.size()) - 1;
            while (j >= 0 && k[static_cast<std::size_t>(j)] == M) k[static_cast<std::size_t>(j--)] = -M;
            if (j < 0) return false;
            ++k[static_cast<std::size_t>(j)];
            return true;
        }());
        return std::pair{ok, "M = " + std::to_string(M)};
    }});

    checks.push_back({"perturbation-gate", [&] {
        const PerturbationInstance good = make_perturbation_instance(bs, v, 4, 0.5, cfg.seed + 1, 1.0);
        const CheckReport rg = verify_perturbation_bound(good.region, good.a, good.b, 0.5, 4);
        const PerturbationInstance bad = make_perturbation_instance(bs, v, 4, 0.5, cfg.seed + 1, 10.0);
        const CheckReport rb = verify_perturbation_bound(bad.region, bad.a, bad.b, 0.5, 4);
        const bool ok = rg.hypotheses_hold && rg.conclusions_hold && !rb.hypotheses_hold &&
                        !rb.conclusions_hold;
        return std::pair{ok, std::string("gate semantics")};
    }});

    checks.push_back({"coupling-norm", [&] {
        const CouplingInstance ci = make_coupling_norm_instance(bs, v, 6, 2, 1e-3, cfg.seed + 2);
        const CheckReport rep = verify_coupling_norm(bs, ci.lambda, ci.energy, ci.theta, ci.omega, ci.eps,
                                                     v, ci.covering, ci.m0, ci.m1, v.rho());
        return std::pair{rep.hypotheses_hold && rep.conclusions_hold, std::string("gated instance")};
    }});

    checks.push_back({"poisson-residual", [&] {
        const EigenpairSample ps = make_poisson_instance(bs, v, 2, cfg.seed + 3);
        const Region inner = origin_cube(bs, 2);
        const double r =
            poisson_residual(bs, inner, ps.energy, ps.theta, ps.omega, ps.eps, v, ps.z);
        const double cap = 1e-9 * ps.z.sup_abs();
        return std::pair{r <= std::max(cap, 1e-12), "residual " + format_real(r)};
    }});

    checks.push_back({"absence-witness-zero-coupling", [&] {
        CounterRng rng(cfg.seed, 16);
        const Eigen::VectorXd omega = sample_omega(bs, rng);
        Eigen::VectorXd theta(bs.d);
        for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-2.0, 2.0);
        const GateEnergy ge = pick_gate_energy(bs, theta, omega, {6}, 0.05, 2.0, rng);
        if (ge.score < 1.01) return std::pair{false, std::string("no gate energy")};
        const WitnessReport rep =
            absence_witness(bs, 6, ge.energy, theta, omega, 0.0, v, PolyBound{1.0, 5.0 * bs.b});
        return std::pair{!rep.refused && rep.pass && rep.rhs_bound == 0.0, std::string("eps = 0")};
    }});

    checks.push_back({"duality-budget", [&] {
        const DualitySample ds = make_bloch_sample(bs, v, 2, 1e-3, cfg.seed + 4, 8);
        const DualityReport rep = duality_residual(bs, ds.sample, ds.omega, ds.eps, v);
        return std::pair{rep.within_budget, "residual " + format_real(rep.residual)};
    }});

    checks.push_back({"spectral-window-free", [&] {
        CounterRng rng(cfg.seed, 17);
        const Eigen::VectorXd omega = sample_omega(bs, rng);
        std::vector<Eigen::VectorXd> grid;
        Eigen::VectorXd th = Eigen::VectorXd::Zero(bs.d);
        th[0] = 1.0;
        grid.push_back(th);
        const WindowReport rep = spectral_window_check(bs, 1.0, origin_cube(bs, 3), omega, 0.0, v, grid);
        return std::pair{rep.pass && rep.min_dist < 1e-12, "min_dist " + format_real(rep.min_dist)};
    }});

    checks.push_back({"rescale-conjugation", [&] {
        CounterRng rng(cfg.seed, 18);
        const Eigen::VectorXd omega = sample_omega(bs, rng);
        Eigen::VectorXd theta(bs.d);
        for (int i = 0; i < bs.d; ++i) theta[i] = rng.uniform(-2.0, 2.0);
        const double gap =
            rescale_conjugation_gap(bs, origin_cube(bs, 2), theta, omega, 0.08, 2.0, v);
        const RescaleMap map(2.0, 10.0);
        const bool round_trip = std::abs(map.inverse_energy(map.forward_energy(50.0)) - 50.0) < 1e-12;
        return std::pair{gap < 1e-10 && round_trip, "gap " + format_real(gap)};
    }});

    res.records = run_tasks(static_cast<int>(checks.size()), cfg.workers, [&](int i) {
        TaskOutcome t;
        const auto [pass, detail] = checks[static_cast<std::size_t>(i)].fn();
        push_field(t, "check", checks[static_cast<std::size_t>(i)].name);
        push_bool(t, "pass", pass);
        push_field(t, "detail", detail);
        if (!pass) t.status = "check failed";
        return t;
    });

    long pass = 0;
    for (const auto& r : res.records)
        for (const auto& [k, vv] : r.fields)
            if (k == "pass" && vv == "true") ++pass;
    res.summary = {{"checks", static_cast<long>(checks.size())}, {"passed", pass}};
    return res;
}

}  // namespace

SweepConfig parse_config(Json doc) {
    SweepConfig cfg;
    if (!doc.contains("seed")) throw std::invalid_argument("config: missing key 'seed'");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.workers = doc.value("workers", 1);
    if (cfg.workers < 1) throw std::invalid_argument("config: workers must be >= 1");
    cfg.out_dir = doc.value("out", "out");
    // runtime knobs stay out of the digest: the same scientific config must
    // produce byte-identical outputs at any worker count or output path
    Json scientific = doc;
    scientific.erase("workers");
    scientific.erase("out");
    cfg.digest = hex64(fnv1a(scientific.dump()));
    cfg.doc = std::move(doc);
    return cfg;
}

SweepConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open '" + path + "'");
    const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw std::invalid_argument("config: parse error at line " + std::to_string(line) + ": " + e.what());
    }
    return parse_config(std::move(doc));
}

void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
    std::string pointer = "/";
    for (char c : assignment.substr(0, eq)) pointer += (c == '.') ? '/' : c;
    const std::string value = assignment.substr(eq + 1);
    Json parsed;
    try {
        parsed = Json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value;  // plain string
    }
    doc[Json::json_pointer(pointer)] = parsed;
}

const std::vector<std::string>& sweep_subcommands() {
    static const std::vector<std::string> subs = {
        "assemble",       "green",        "ldt-scan",       "resonance-measure",
        "double-resonance", "cartan-probe", "coupling-verify", "witness",
        "duality",        "spectrum-window", "selftest"};
    return subs;
}

SweepResult run_sweep(const std::string& subcommand, const SweepConfig& cfg) {
    const CommonCtx ctx = parse_common(cfg);
    SweepResult res;
    std::string detail_header;
    if (subcommand == "assemble") res = run_assemble(cfg, ctx);
    else if (subcommand == "green") res = run_green(cfg, ctx);
    else if (subcommand == "ldt-scan") res = run_ldt_scan(cfg, ctx);
    else if (subcommand == "resonance-measure") res = run_resonance_measure(cfg, ctx);
    else if (subcommand == "double-resonance") {
        res = run_double_resonance(cfg, ctx);
        detail_header = "task,M,annulus_size,failures,first_failure_k";
    } else if (subcommand == "cartan-probe") {
        res = run_cartan_probe(cfg, ctx);
        detail_header = "task,y,norm,is_bad";
    } else if (subcommand == "coupling-verify") res = run_coupling_verify(cfg, ctx);
    else if (subcommand == "witness") res = run_witness(cfg, ctx);
    else if (subcommand == "duality") res = run_duality(cfg, ctx);
    else if (subcommand == "spectrum-window") res = run_spectrum_window(cfg, ctx);
    else if (subcommand == "selftest") res = run_selftest(cfg, ctx);
    else throw std::invalid_argument("unknown subcommand '" + subcommand + "'");

    const auto now = std::chrono::system_clock::now();
    res.timestamp = std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
                                       now.time_since_epoch())
                                       .count());
    write_outputs(cfg, res, detail_header);
    return res;
}

}  // namespace qpgl
