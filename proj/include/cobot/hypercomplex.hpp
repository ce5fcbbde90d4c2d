#pragma once

#include <vector>

#include "cobot/rng.hpp"
#include "cobot/tensor.hpp"

namespace cobot {

// N-dimensional hypercomplex number over the basis {1, j_1, ..., j_{N-1}}.
// N = 4 is the quaternion algebra used throughout; N = 8 is reachable through
// the Cayley-Dickson doubling but carries no guarantees beyond the algebraic
// identities tested here.
class Hypercomplex {
public:
    explicit Hypercomplex(std::vector<double> components);
    Hypercomplex(double a0, double a1, double a2, double a3)
        : c_{a0, a1, a2, a3} {}

    static Hypercomplex zero(int n);
    static Hypercomplex one(int n); // multiplicative identity (1, 0, ..., 0)

    int dim() const { return static_cast<int>(c_.size()); }
    double operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return c_[static_cast<std::size_t>(i)]; }
    const std::vector<double>& components() const { return c_; }

    Hypercomplex operator+(const Hypercomplex& o) const;
    Hypercomplex operator-(const Hypercomplex& o) const;
    Hypercomplex operator*(double s) const;
    bool operator==(const Hypercomplex&) const = default;

private:
    std::vector<double> c_;
};

// Non-commutative product. Dimensions must match and be a power of two <= 8;
// evaluated by Cayley-Dickson doubling, which at N = 4 is the Hamilton product
// (j1 j2 = j3, j2 j1 = -j3, j_i^2 = -1).
Hypercomplex hamilton_product(const Hypercomplex& a, const Hypercomplex& b);

Hypercomplex conjugate(const Hypercomplex& a);
double norm(const Hypercomplex& a);
Hypercomplex normalize(const Hypercomplex& a); // requires norm > 1e-30

// M(q) with M(q) . vec(b) == vec(q x b) for every quaternion b; linear in the
// components of q, orthogonal when q is unit. Returned as a (4,4,1) tensor.
DenseTensor left_mul_matrix(const Hypercomplex& q);

// V/4 quaternions backing one generated projection head.
struct QuaternionBank {
    std::vector<Hypercomplex> elements;

    int hidden_dim() const { return 4 * static_cast<int>(elements.size()); }
    // (4, V/4, 1) tensor, column k = components of element k
    DenseTensor as_tensor() const;
    static QuaternionBank from_tensor(const DenseTensor& t);
};

// Block-diagonal V x V matrix with blocks M(q_k). Unit banks give an
// orthogonal matrix; every entry is +-1 times a single quaternion component.
DenseTensor build_projection_weights(const QuaternionBank& bank, int v);

// Same assembly from the (4, V/4, 1) parameter layout.
DenseTensor quat_block_weights(const DenseTensor& quat_params);

// Uniform on the unit 3-sphere: four i.i.d. Gaussians, normalized.
Hypercomplex random_unit_quaternion(RngStream& rng);
QuaternionBank random_unit_bank(int v, RngStream& rng);

} // namespace cobot
