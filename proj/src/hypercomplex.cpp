#include "cobot/hypercomplex.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace cobot {

namespace {

bool supported_dim(int n) { return n == 1 || n == 2 || n == 4 || n == 8; }

void conj_into(std::span<const double> a, std::span<double> out) {
    out[0] = a[0];
    for (std::size_t i = 1; i < a.size(); ++i) out[i] = -a[i];
}

// Cayley-Dickson doubling: (p,q)(r,s) = (pr - s~q, sp + qr~)
void cd_mul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t n = a.size();
    if (n == 1) {
        out[0] = a[0] * b[0];
        return;
    }
    const std::size_t h = n / 2;
    auto p = a.subspan(0, h), q = a.subspan(h, h);
    auto r = b.subspan(0, h), s = b.subspan(h, h);

    std::vector<double> t1(h), t2(h), tc(h);

    cd_mul(p, r, std::span<double>(t1));       // pr
    conj_into(s, tc);
    cd_mul(tc, q, std::span<double>(t2));      // s~ q
    for (std::size_t i = 0; i < h; ++i) out[i] = t1[i] - t2[i];

    cd_mul(s, p, std::span<double>(t1));       // sp
    conj_into(r, tc);
    cd_mul(q, tc, std::span<double>(t2));      // q r~
    for (std::size_t i = 0; i < h; ++i) out[h + i] = t1[i] + t2[i];
}

} // namespace

Hypercomplex::Hypercomplex(std::vector<double> components) : c_(std::move(components)) {
    if (!supported_dim(dim()))
        throw std::invalid_argument("Hypercomplex: unsupported dimension " + std::to_string(dim()));
}

Hypercomplex Hypercomplex::zero(int n) { return Hypercomplex(std::vector<double>(n, 0.0)); }

Hypercomplex Hypercomplex::one(int n) {
    std::vector<double> c(n, 0.0);
    c[0] = 1.0;
    return Hypercomplex(std::move(c));
}

Hypercomplex Hypercomplex::operator+(const Hypercomplex& o) const {
    if (dim() != o.dim()) throw std::invalid_argument("Hypercomplex+: dimension mismatch");
    std::vector<double> c(c_);
    for (int i = 0; i < dim(); ++i) c[i] += o.c_[i];
    return Hypercomplex(std::move(c));
}

Hypercomplex Hypercomplex::operator-(const Hypercomplex& o) const {
    if (dim() != o.dim()) throw std::invalid_argument("Hypercomplex-: dimension mismatch");
    std::vector<double> c(c_);
    for (int i = 0; i < dim(); ++i) c[i] -= o.c_[i];
    return Hypercomplex(std::move(c));
}

Hypercomplex Hypercomplex::operator*(double s) const {
    std::vector<double> c(c_);
    for (double& x : c) x *= s;
    return Hypercomplex(std::move(c));
}

Hypercomplex hamilton_product(const Hypercomplex& a, const Hypercomplex& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("hamilton_product: dimension mismatch " +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    if (a.dim() == 4) {
        const double w1 = a[0], x1 = a[1], y1 = a[2], z1 = a[3];
        const double w2 = b[0], x2 = b[1], y2 = b[2], z2 = b[3];
        return Hypercomplex{w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2};
    }
    std::vector<double> out(static_cast<std::size_t>(a.dim()));
    cd_mul(a.components(), b.components(), out);
    return Hypercomplex(std::move(out));
}

Hypercomplex conjugate(const Hypercomplex& a) {
    std::vector<double> c(a.components());
    for (std::size_t i = 1; i < c.size(); ++i) c[i] = -c[i];
    return Hypercomplex(std::move(c));
}

double norm(const Hypercomplex& a) {
    double s = 0.0;
    for (double x : a.components()) s += x * x;
    return std::sqrt(s);
}

Hypercomplex normalize(const Hypercomplex& a) {
    const double n = norm(a);
    if (n <= 1e-30) throw std::invalid_argument("normalize: near-zero hypercomplex element");
    return a * (1.0 / n);
}

DenseTensor left_mul_matrix(const Hypercomplex& q) {
    if (q.dim() != 4)
        throw std::invalid_argument("left_mul_matrix: requires dimension 4, got " +
                                    std::to_string(q.dim()));
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    DenseTensor m({4, 4, 1});
    // column c = vec(q x e_c)
    m.at(0, 0) = w;  m.at(0, 1) = -x; m.at(0, 2) = -y; m.at(0, 3) = -z;
    m.at(1, 0) = x;  m.at(1, 1) = w;  m.at(1, 2) = -z; m.at(1, 3) = y;
    m.at(2, 0) = y;  m.at(2, 1) = z;  m.at(2, 2) = w;  m.at(2, 3) = -x;
    m.at(3, 0) = z;  m.at(3, 1) = -y; m.at(3, 2) = x;  m.at(3, 3) = w;
    return m;
}

DenseTensor QuaternionBank::as_tensor() const {
    DenseTensor t({4, static_cast<int>(elements.size()), 1});
    for (int k = 0; k < t.n2(); ++k) {
        if (elements[static_cast<std::size_t>(k)].dim() != 4)
            throw std::invalid_argument("QuaternionBank: element dimension != 4");
        for (int i = 0; i < 4; ++i) t.at(i, k) = elements[static_cast<std::size_t>(k)][i];
    }
    return t;
}

QuaternionBank QuaternionBank::from_tensor(const DenseTensor& t) {
    if (t.n1() != 4 || t.n3() != 1)
        throw std::invalid_argument("QuaternionBank::from_tensor: expects (4,m,1), got " +
                                    t.shape().str());
    QuaternionBank bank;
    for (int k = 0; k < t.n2(); ++k)
        bank.elements.push_back(Hypercomplex{t.at(0, k), t.at(1, k), t.at(2, k), t.at(3, k)});
    return bank;
}

DenseTensor build_projection_weights(const QuaternionBank& bank, int v) {
    if (v % 4 != 0)
        throw std::invalid_argument("build_projection_weights: hidden dimension " +
                                    std::to_string(v) + " not divisible by 4");
    if (bank.hidden_dim() != v)
        throw std::invalid_argument("build_projection_weights: bank covers " +
                                    std::to_string(bank.hidden_dim()) + " dims, expected " +
                                    std::to_string(v));
    return quat_block_weights(bank.as_tensor());
}

DenseTensor quat_block_weights(const DenseTensor& quat_params) {
    if (quat_params.n1() != 4 || quat_params.n3() != 1)
        throw std::invalid_argument("quat_block_weights: expects (4,m,1), got " +
                                    quat_params.shape().str());
    const int m = quat_params.n2();
    const int v = 4 * m;
    DenseTensor w({v, v, 1});
    for (int k = 0; k < m; ++k) {
        DenseTensor blk = left_mul_matrix(Hypercomplex{
            quat_params.at(0, k), quat_params.at(1, k), quat_params.at(2, k), quat_params.at(3, k)});
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) w.at(4 * k + i, 4 * k + j) = blk.at(i, j);
    }
    return w;
}

Hypercomplex random_unit_quaternion(RngStream& rng) {
    Hypercomplex q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return normalize(q);
}

QuaternionBank random_unit_bank(int v, RngStream& rng) {
    if (v % 4 != 0)
        throw std::invalid_argument("random_unit_bank: hidden dimension " + std::to_string(v) +
                                    " not divisible by 4");
    QuaternionBank bank;
    for (int k = 0; k < v / 4; ++k) bank.elements.push_back(random_unit_quaternion(rng));
    return bank;
}

} // namespace cobot
