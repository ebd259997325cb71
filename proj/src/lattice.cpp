#include "levelstat/lattice.hpp"

#include <cmath>
#include <stdexcept>

namespace levelstat {

LatticeBox::LatticeBox(int dim, int side) : dim_(dim), side_(side) {
    if (dim < 1) throw std::invalid_argument("LatticeBox: dimension must be >= 1");
    if (side < 1) throw std::invalid_argument("LatticeBox: side must be >= 1");
    lo_ = side % 2 == 1 ? -(side - 1) / 2 : -side / 2;
    sites_ = 1;
    for (int a = 0; a < dim; ++a) {
        if (sites_ > (1L << 40) / side) throw std::invalid_argument("LatticeBox: too many sites");
        sites_ *= side;
    }
    stride_.assign(dim, 1);
    for (int a = dim - 2; a >= 0; --a) stride_[a] = stride_[a + 1] * side;
}

LatticeBox LatticeBox::from_radius(int dim, int radius) {
    if (radius < 0) throw std::invalid_argument("LatticeBox: radius must be >= 0");
    return LatticeBox(dim, 2 * radius + 1);
}

LatticeBox LatticeBox::from_side(int dim, int side) { return LatticeBox(dim, side); }

bool LatticeBox::contains(std::span<const int> x) const {
    if (static_cast<int>(x.size()) != dim_) return false;
    for (int a = 0; a < dim_; ++a)
        if (x[a] < lo_ || x[a] > hi()) return false;
    return true;
}

long LatticeBox::index_of(std::span<const int> x) const {
    if (!contains(x)) throw std::out_of_range("LatticeBox: coordinate outside box");
    long idx = 0;
    for (int a = 0; a < dim_; ++a) idx += (x[a] - lo_) * stride_[a];
    return idx;
}

void LatticeBox::coord_of(long idx, std::span<int> out) const {
    if (idx < 0 || idx >= sites_) throw std::out_of_range("LatticeBox: site index outside box");
    for (int a = 0; a < dim_; ++a) {
        out[a] = static_cast<int>(idx / stride_[a]) + lo_;
        idx %= stride_[a];
    }
}

std::vector<int> LatticeBox::coord_of(long idx) const {
    std::vector<int> x(dim_);
    coord_of(idx, x);
    return x;
}

long LatticeBox::neighbor(long idx, int axis, int dir) const {
    long along = (idx / stride_[axis]) % side_;
    long moved = along + dir;
    if (moved < 0 || moved >= side_) return -1;
    return idx + dir * stride_[axis];
}

double LatticeBox::distance(long a, long b) const {
    double s = 0;
    for (int ax = 0; ax < dim_; ++ax) {
        double da = static_cast<double>((a / stride_[ax]) % side_) -
                    static_cast<double>((b / stride_[ax]) % side_);
        s += da * da;
    }
    return std::sqrt(s);
}

} // namespace levelstat
