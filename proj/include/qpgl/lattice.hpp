#ifndef QPGL_LATTICE_HPP
#define QPGL_LATTICE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

namespace qpgl {

// Flat b-tuple of integers, blocked per BlockStructure. Lexicographic order
// (std::vector's operator<) fixes matrix row/column order everywhere.
using MultiIndex = std::vector<int>;

// Dimensions (d; b_1,...,b_d) that shape Z^b and its blocking.
struct BlockStructure {
    std::vector<int> blocks;   // b_i, one per space dimension
    std::vector<int> offsets;  // start of block i in the flat tuple
    int d = 0;
    int b = 0;

    BlockStructure() = default;
    explicit BlockStructure(std::vector<int> block_sizes);

    // the standing assumption b > d; advisory, never enforced
    bool b_exceeds_d() const { return b > d; }
};

// Frequency vector in [0,2pi]^b, blocked like a MultiIndex.
struct Frequency {
    Eigen::VectorXd entries;

    Frequency() = default;
    Frequency(const BlockStructure& bs, Eigen::VectorXd values);
};

int sup_norm(const MultiIndex& k);
int sup_dist(const MultiIndex& a, const MultiIndex& b);

// component i is the inner product of block k_i with block w_i
Eigen::VectorXd block_dot(const BlockStructure& bs, const MultiIndex& k, const Eigen::VectorXd& w);

enum class Restriction { None, RemoveNegative, RemovePositive };

// An elementary region: a cube of radius N around the center, with the tagged
// strict half-lines (relative to the center) removed coordinate-wise. Either
// all tags are None or at least two are not.
struct RegionDescriptor {
    MultiIndex center;
    int size = 0;
    std::vector<Restriction> restrictions;

    RegionDescriptor(MultiIndex c, int n, std::vector<Restriction> tags);
    RegionDescriptor translated(const MultiIndex& new_center) const;
};

// Finite point set, stored sorted with a hash index for O(1) membership.
class Region {
public:
    Region() = default;
    explicit Region(std::vector<MultiIndex> pts);

    int size() const { return static_cast<int>(points_.size()); }
    bool empty() const { return points_.empty(); }
    const std::vector<MultiIndex>& points() const { return points_; }
    const MultiIndex& point(int i) const { return points_[static_cast<std::size_t>(i)]; }

    bool contains(const MultiIndex& k) const;
    // row index in lexicographic order, -1 if absent
    int index_of(const MultiIndex& k) const;

    int diameter() const;
    bool contains_all(const Region& other) const;

private:
    struct IndexHash {
        std::size_t operator()(const MultiIndex& k) const;
    };
    std::vector<MultiIndex> points_;
    std::unordered_map<MultiIndex, int, IndexHash> index_;
};

// sup-norm distance from a point to a set; empty sets are infinitely far
int dist(const MultiIndex& m, const Region& region);
// distance from m to (region minus excluded)
int dist_excluding(const MultiIndex& m, const Region& region, const Region& excluded);

constexpr int kInfiniteDistance = std::numeric_limits<int>::max();

Region enumerate_region(const BlockStructure& bs, const RegionDescriptor& desc);

// All descriptors centered at 0 at the given size: the full cube plus every
// restriction pattern with >= 2 non-None tags; 3^b - 2b of them.
std::vector<RegionDescriptor> elementary_regions_at_scale(int size, const BlockStructure& bs);

std::string to_string(const MultiIndex& k);

}  // namespace qpgl

#endif
