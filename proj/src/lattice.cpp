#include "qpgl/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace qpgl {

BlockStructure::BlockStructure(std::vector<int> block_sizes) : blocks(std::move(block_sizes)) {
    if (blocks.empty()) throw std::invalid_argument("BlockStructure: needs at least one block");
    d = static_cast<int>(blocks.size());
    offsets.resize(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i] < 1) throw std::invalid_argument("BlockStructure: block sizes must be >= 1");
        offsets[i] = b;
        b += blocks[i];
    }
}

Frequency::Frequency(const BlockStructure& bs, Eigen::VectorXd values) : entries(std::move(values)) {
    if (entries.size() != bs.b) throw std::invalid_argument("Frequency: expected " + std::to_string(bs.b) + " entries");
    for (Eigen::Index i = 0; i < entries.size(); ++i) {
        if (!(entries[i] >= 0.0 && entries[i] <= 2.0 * M_PI))
            throw std::invalid_argument("Frequency: entries must lie in [0, 2pi]");
    }
}

int sup_norm(const MultiIndex& k) {
    int m = 0;
    for (int v : k) m = std::max(m, std::abs(v));
    return m;
}

int sup_dist(const MultiIndex& a, const MultiIndex& b) {
    int m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Eigen::VectorXd block_dot(const BlockStructure& bs, const MultiIndex& k, const Eigen::VectorXd& w) {
    if (static_cast<int>(k.size()) != bs.b || w.size() != bs.b)
        throw std::invalid_argument("block_dot: shape mismatch with block structure");
    Eigen::VectorXd out(bs.d);
    for (int i = 0; i < bs.d; ++i) {
        double s = 0.0;
        for (int j = 0; j < bs.blocks[static_cast<std::size_t>(i)]; ++j) {
            const int f = bs.offsets[static_cast<std::size_t>(i)] + j;
            s += k[static_cast<std::size_t>(f)] * w[f];
        }
        out[i] = s;
    }
    return out;
}

RegionDescriptor::RegionDescriptor(MultiIndex c, int n, std::vector<Restriction> tags)
    : center(std::move(c)), size(n), restrictions(std::move(tags)) {
    if (size < 0) throw std::invalid_argument("RegionDescriptor: size must be >= 0");
    if (restrictions.size() != center.size())
        throw std::invalid_argument("RegionDescriptor: one restriction tag per coordinate");
    int active = 0;
    for (auto t : restrictions)
        if (t != Restriction::None) ++active;
    if (active == 1)
        throw std::invalid_argument("RegionDescriptor: either no restrictions or at least two");
}

RegionDescriptor RegionDescriptor::translated(const MultiIndex& new_center) const {
    return RegionDescriptor(new_center, size, restrictions);
}

std::size_t Region::IndexHash::operator()(const MultiIndex& k) const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the flat tuple
    for (int v : k) {
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
}

Region::Region(std::vector<MultiIndex> pts) : points_(std::move(pts)) {
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());
    index_.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) index_.emplace(points_[i], static_cast<int>(i));
}

bool Region::contains(const MultiIndex& k) const { return index_.count(k) != 0; }

int Region::index_of(const MultiIndex& k) const {
    auto it = index_.find(k);
    return it == index_.end() ? -1 : it->second;
}

int Region::diameter() const {
    if (points_.empty()) return 0;
    // coordinate-wise extent suffices for the sup norm
    const std::size_t nb = points_[0].size();
    int diam = 0;
    for (std::size_t j = 0; j < nb; ++j) {
        int lo = points_[0][j], hi = points_[0][j];
        for (const auto& p : points_) {
            lo = std::min(lo, p[j]);
            hi = std::max(hi, p[j]);
        }
        diam = std::max(diam, hi - lo);
    }
    return diam;
}

bool Region::contains_all(const Region& other) const {
    for (const auto& p : other.points())
        if (!contains(p)) return false;
    return true;
}

int dist(const MultiIndex& m, const Region& region) {
    if (region.empty()) return kInfiniteDistance;
    int best = kInfiniteDistance;
    for (const auto& p : region.points()) best = std::min(best, sup_dist(m, p));
    return best;
}

int dist_excluding(const MultiIndex& m, const Region& region, const Region& excluded) {
    int best = kInfiniteDistance;
    for (const auto& p : region.points()) {
        if (excluded.contains(p)) continue;
        best = std::min(best, sup_dist(m, p));
    }
    return best;
}

Region enumerate_region(const BlockStructure& bs, const RegionDescriptor& desc) {
    if (static_cast<int>(desc.center.size()) != bs.b)
        throw std::invalid_argument("enumerate_region: center does not match block structure");
    const int n = desc.size;
    std::vector<MultiIndex> pts;
    pts.reserve(static_cast<std::size_t>(std::pow(2.0 * n + 1.0, bs.b)));
    MultiIndex rel(static_cast<std::size_t>(bs.b), -n);
    for (;;) {
        bool keep = true;
        for (int j = 0; j < bs.b && keep; ++j) {
            switch (desc.restrictions[static_cast<std::size_t>(j)]) {
                case Restriction::RemoveNegative: keep = rel[static_cast<std::size_t>(j)] >= 0; break;
                case Restriction::RemovePositive: keep = rel[static_cast<std::size_t>(j)] <= 0; break;
                case Restriction::None: break;
            }
        }
        if (keep) {
            MultiIndex p(static_cast<std::size_t>(bs.b));
            for (int j = 0; j < bs.b; ++j)
                p[static_cast<std::size_t>(j)] = desc.center[static_cast<std::size_t>(j)] + rel[static_cast<std::size_t>(j)];
            pts.push_back(std::move(p));
        }
        int j = bs.b - 1;
        while (j >= 0 && rel[static_cast<std::size_t>(j)] == n) rel[static_cast<std::size_t>(j--)] = -n;
        if (j < 0) break;
        ++rel[static_cast<std::size_t>(j)];
    }
    return Region(std::move(pts));
}

std::vector<RegionDescriptor> elementary_regions_at_scale(int size, const BlockStructure& bs) {
    if (size < 0) throw std::invalid_argument("elementary_regions_at_scale: size must be >= 0");
    const MultiIndex origin(static_cast<std::size_t>(bs.b), 0);
    std::vector<RegionDescriptor> out;
    out.emplace_back(origin, size, std::vector<Restriction>(static_cast<std::size_t>(bs.b), Restriction::None));
    // odometer over the 3^b tag patterns, keeping those with >= 2 active tags
    std::vector<int> tags(static_cast<std::size_t>(bs.b), 0);
    for (;;) {
        int j = bs.b - 1;
        while (j >= 0 && tags[static_cast<std::size_t>(j)] == 2) tags[static_cast<std::size_t>(j--)] = 0;
        if (j < 0) break;
        ++tags[static_cast<std::size_t>(j)];
        int active = 0;
        for (int t : tags)
            if (t != 0) ++active;
        if (active < 2) continue;
        std::vector<Restriction> r(static_cast<std::size_t>(bs.b));
        for (int i = 0; i < bs.b; ++i)
            r[static_cast<std::size_t>(i)] = tags[static_cast<std::size_t>(i)] == 0 ? Restriction::None
                                             : tags[static_cast<std::size_t>(i)] == 1 ? Restriction::RemoveNegative
                                                                                      : Restriction::RemovePositive;
        out.emplace_back(origin, size, std::move(r));
    }
    return out;
}

std::string to_string(const MultiIndex& k) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < k.size(); ++i) os << (i ? "," : "") << k[i];
    os << ")";
    return os.str();
}

}  // namespace qpgl
