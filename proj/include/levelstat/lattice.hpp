#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace levelstat {

// Finite box of Z^d centered at the origin, row-major site indexing.
// Odd side s = 2L+1 spans {-L..L}; even side s = 2L spans {-L..L-1}.
class LatticeBox {
public:
    LatticeBox(int dim, int side);

    static LatticeBox from_radius(int dim, int radius);   // side 2*radius+1
    static LatticeBox from_side(int dim, int side);

    int dim() const { return dim_; }
    int side() const { return side_; }
    int lo() const { return lo_; }
    int hi() const { return lo_ + side_ - 1; }
    double radius() const { return (side_ - 1) / 2.0; }
    long sites() const { return sites_; }

    bool contains(std::span<const int> x) const;
    long index_of(std::span<const int> x) const;
    void coord_of(long idx, std::span<int> out) const;
    std::vector<int> coord_of(long idx) const;

    // Index of the nearest-neighbor site idx + dir*e_axis, or -1 outside the box.
    long neighbor(long idx, int axis, int dir) const;

    // Euclidean distance between two sites.
    double distance(long a, long b) const;

private:
    int dim_;
    int side_;
    int lo_;
    long sites_;
    std::vector<long> stride_;
};

} // namespace levelstat
