#include "cobot/tensor_ops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace cobot {

namespace {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;

ConstMatMap map_of(const DenseTensor& t) {
    if (t.n3() != 1)
        throw std::invalid_argument("matrix kernel requires n3 == 1, got " + t.shape().str());
    return ConstMatMap(t.data(), t.n1(), t.n2());
}

void require_inner(const DenseTensor& a, const DenseTensor& b, int ak, int bk, const char* op) {
    if (ak != bk)
        throw std::invalid_argument(std::string(op) + ": inner dimension mismatch " +
                                    a.shape().str() + " vs " + b.shape().str());
}

} // namespace

DenseTensor mm_nn(const DenseTensor& a, const DenseTensor& b) {
    auto A = map_of(a), B = map_of(b);
    require_inner(a, b, a.n2(), b.n1(), "mm_nn");
    DenseTensor out({a.n1(), b.n2(), 1});
    MatMap(out.data(), out.n1(), out.n2()).noalias() = A * B;
    return out;
}

DenseTensor mm_nt(const DenseTensor& a, const DenseTensor& b) {
    auto A = map_of(a), B = map_of(b);
    require_inner(a, b, a.n2(), b.n2(), "mm_nt");
    DenseTensor out({a.n1(), b.n1(), 1});
    MatMap(out.data(), out.n1(), out.n2()).noalias() = A * B.transpose();
    return out;
}

DenseTensor mm_tn(const DenseTensor& a, const DenseTensor& b) {
    auto A = map_of(a), B = map_of(b);
    require_inner(a, b, a.n1(), b.n1(), "mm_tn");
    DenseTensor out({a.n2(), b.n2(), 1});
    MatMap(out.data(), out.n1(), out.n2()).noalias() = A.transpose() * B;
    return out;
}

void mm_nn_acc(const DenseTensor& a, const DenseTensor& b, DenseTensor& out) {
    auto A = map_of(a), B = map_of(b);
    require_inner(a, b, a.n2(), b.n1(), "mm_nn_acc");
    MatMap(out.data(), out.n1(), out.n2()).noalias() += A * B;
}

void mm_nt_acc(const DenseTensor& a, const DenseTensor& b, DenseTensor& out) {
    auto A = map_of(a), B = map_of(b);
    require_inner(a, b, a.n2(), b.n2(), "mm_nt_acc");
    MatMap(out.data(), out.n1(), out.n2()).noalias() += A * B.transpose();
}

void mm_tn_acc(const DenseTensor& a, const DenseTensor& b, DenseTensor& out) {
    auto A = map_of(a), B = map_of(b);
    require_inner(a, b, a.n1(), b.n1(), "mm_tn_acc");
    MatMap(out.data(), out.n1(), out.n2()).noalias() += A.transpose() * B;
}

DenseTensor transpose(const DenseTensor& a) {
    auto A = map_of(a);
    DenseTensor out({a.n2(), a.n1(), 1});
    MatMap(out.data(), out.n1(), out.n2()) = A.transpose();
    return out;
}

DenseTensor unfold3(const DenseTensor& a) {
    const int n1 = a.n1(), n2 = a.n2(), n3 = a.n3();
    DenseTensor out({n1 * n3, n2, 1});
    for (int k = 0; k < n3; ++k)
        for (int j = 0; j < n2; ++j)
            for (int i = 0; i < n1; ++i) out.at(k * n1 + i, j, 0) = a.at(i, j, k);
    return out;
}

DenseTensor fold3(const DenseTensor& m, Shape shape) {
    if (m.n3() != 1 || m.n1() != shape.n1 * shape.n3 || m.n2() != shape.n2)
        throw std::invalid_argument("fold3: matrix " + m.shape().str() +
                                    " inconsistent with target " + shape.str());
    DenseTensor out(shape);
    for (int k = 0; k < shape.n3; ++k)
        for (int j = 0; j < shape.n2; ++j)
            for (int i = 0; i < shape.n1; ++i) out.at(i, j, k) = m.at(k * shape.n1 + i, j, 0);
    return out;
}

DenseTensor bcirc(const DenseTensor& a) {
    const int n1 = a.n1(), n2 = a.n2(), n3 = a.n3();
    DenseTensor out({n1 * n3, n2 * n3, 1});
    for (int bj = 0; bj < n3; ++bj) {
        for (int bi = 0; bi < n3; ++bi) {
            const int k = ((bi - bj) % n3 + n3) % n3;
            for (int j = 0; j < n2; ++j)
                for (int i = 0; i < n1; ++i)
                    out.at(bi * n1 + i, bj * n2 + j, 0) = a.at(i, j, k);
        }
    }
    return out;
}

DenseTensor t_product(const DenseTensor& a, const DenseTensor& b) {
    if (a.n2() != b.n1() || a.n3() != b.n3())
        throw std::invalid_argument("t_product: incompatible shapes " + a.shape().str() + " vs " +
                                    b.shape().str());
    DenseTensor prod = mm_nn(bcirc(a), unfold3(b));
    return fold3(prod, {a.n1(), b.n2(), a.n3()});
}

DenseTensor mode3_product(const DenseTensor& t, const DenseTensor& s) {
    if (s.n3() != 1 || s.n2() != t.n3())
        throw std::invalid_argument("mode3_product: transform " + s.shape().str() +
                                    " incompatible with tensor " + t.shape().str());
    const int m = s.n1();
    DenseTensor out({t.n1(), t.n2(), m});
    const std::int64_t slice_len = static_cast<std::int64_t>(t.n1()) * t.n2();
    for (int k = 0; k < m; ++k) {
        double* dst = out.slice(k);
        for (int l = 0; l < t.n3(); ++l) {
            const double w = s.at(k, l, 0);
            if (w == 0.0) continue;
            const double* src = t.slice(l);
            for (std::int64_t i = 0; i < slice_len; ++i) dst[i] += w * src[i];
        }
    }
    return out;
}

DenseTensor slicewise_product(const DenseTensor& a, const DenseTensor& b) {
    if (a.n2() != b.n1() || a.n3() != b.n3())
        throw std::invalid_argument("slicewise_product: incompatible shapes " + a.shape().str() +
                                    " vs " + b.shape().str());
    DenseTensor out({a.n1(), b.n2(), a.n3()});
    for (int k = 0; k < a.n3(); ++k) {
        ConstMatMap A(a.slice(k), a.n1(), a.n2());
        ConstMatMap B(b.slice(k), b.n1(), b.n2());
        MatMap(out.slice(k), a.n1(), b.n2()).noalias() = A * B;
    }
    return out;
}

ComplexMatrix dft_matrix(int n) {
    ComplexMatrix f(n);
    const double w = -2.0 * std::numbers::pi / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            f.at(i, j) = std::polar(1.0, w * ((static_cast<long long>(i) * j) % n));
    return f;
}

ComplexMatrix complex_inverse(const ComplexMatrix& m) {
    const int n = m.n;
    ComplexMatrix a = m;
    ComplexMatrix inv(n);
    for (int i = 0; i < n; ++i) inv.at(i, i) = 1.0;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(a.at(col, col));
        for (int r = col + 1; r < n; ++r) {
            if (std::abs(a.at(r, col)) > best) {
                best = std::abs(a.at(r, col));
                pivot = r;
            }
        }
        if (best == 0.0) throw std::runtime_error("complex_inverse: singular matrix");
        if (pivot != col) {
            for (int j = 0; j < n; ++j) {
                std::swap(a.at(pivot, j), a.at(col, j));
                std::swap(inv.at(pivot, j), inv.at(col, j));
            }
        }
        const std::complex<double> d = a.at(col, col);
        for (int j = 0; j < n; ++j) {
            a.at(col, j) /= d;
            inv.at(col, j) /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const std::complex<double> f = a.at(r, col);
            if (f == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                a.at(r, j) -= f * a.at(col, j);
                inv.at(r, j) -= f * inv.at(col, j);
            }
        }
    }
    return inv;
}

namespace {

// complex tensor with the DenseTensor layout, used only on this path
struct ComplexTensor {
    Shape shape;
    std::vector<std::complex<double>> data;
    explicit ComplexTensor(Shape s) : shape(s), data(static_cast<std::size_t>(s.numel())) {}
    std::complex<double>* slice(int k) {
        return data.data() + static_cast<std::size_t>(k) * shape.n1 * shape.n2;
    }
    const std::complex<double>* slice(int k) const {
        return data.data() + static_cast<std::size_t>(k) * shape.n1 * shape.n2;
    }
};

ComplexTensor complex_mode3(const ComplexTensor& t, const ComplexMatrix& s) {
    ComplexTensor out({t.shape.n1, t.shape.n2, s.n});
    const std::int64_t len = static_cast<std::int64_t>(t.shape.n1) * t.shape.n2;
    for (int k = 0; k < s.n; ++k) {
        auto* dst = out.slice(k);
        for (int l = 0; l < t.shape.n3; ++l) {
            const std::complex<double> w = s.at(k, l);
            const auto* src = t.slice(l);
            for (std::int64_t i = 0; i < len; ++i) dst[i] += w * src[i];
        }
    }
    return out;
}

ComplexTensor to_complex(const DenseTensor& t) {
    ComplexTensor out(t.shape());
    for (std::int64_t i = 0; i < t.numel(); ++i) out.data[i] = t.flat()[i];
    return out;
}

} // namespace

DenseTensor transform_domain_tproduct(const DenseTensor& a, const DenseTensor& b,
                                      const ComplexMatrix& s_dft, double imag_tol) {
    if (a.n2() != b.n1() || a.n3() != b.n3())
        throw std::invalid_argument("transform_domain_tproduct: incompatible shapes " +
                                    a.shape().str() + " vs " + b.shape().str());
    if (s_dft.n != a.n3())
        throw std::invalid_argument("transform_domain_tproduct: transform order " +
                                    std::to_string(s_dft.n) + " != n3 " + std::to_string(a.n3()));

    const ComplexMatrix s_inv = complex_inverse(s_dft);
    ComplexTensor abar = complex_mode3(to_complex(a), s_dft);
    ComplexTensor bbar = complex_mode3(to_complex(b), s_dft);

    ComplexTensor cbar({a.n1(), b.n2(), a.n3()});
    for (int k = 0; k < a.n3(); ++k) {
        const auto* A = abar.slice(k);
        const auto* B = bbar.slice(k);
        auto* C = cbar.slice(k);
        const int n1 = a.n1(), n2 = a.n2(), l = b.n2();
        for (int j = 0; j < l; ++j)
            for (int p = 0; p < n2; ++p) {
                const std::complex<double> w = B[static_cast<std::size_t>(j) * n2 + p];
                for (int i = 0; i < n1; ++i)
                    C[static_cast<std::size_t>(j) * n1 + i] += A[static_cast<std::size_t>(p) * n1 + i] * w;
            }
    }

    ComplexTensor c = complex_mode3(cbar, s_inv);

    double max_imag = 0.0, max_real = 0.0;
    for (const auto& z : c.data) {
        max_imag = std::max(max_imag, std::abs(z.imag()));
        max_real = std::max(max_real, std::abs(z.real()));
    }
    if (max_imag > imag_tol * std::max(1.0, max_real))
        throw std::runtime_error("transform_domain_tproduct: imaginary residue " +
                                 std::to_string(max_imag) + " exceeds tolerance");

    DenseTensor out(c.shape);
    for (std::int64_t i = 0; i < out.numel(); ++i) out.flat()[i] = c.data[i].real();
    return out;
}

double condition_estimate(const DenseTensor& square) {
    if (square.n3() != 1 || square.n1() != square.n2())
        throw std::invalid_argument("condition_estimate: expects a square matrix, got " +
                                    square.shape().str());
    const int n = square.n1();
    auto col_norm_1 = [n](const Eigen::MatrixXd& m) {
        double best = 0.0;
        for (int j = 0; j < n; ++j) best = std::max(best, m.col(j).cwiseAbs().sum());
        return best;
    };
    ConstMatMap A(square.data(), n, n);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd inv = lu.inverse();
    return col_norm_1(A) * col_norm_1(inv);
}

void csv_dump_matrix(const DenseTensor& m, std::ostream& os) {
    if (m.n3() != 1)
        throw std::invalid_argument("csv_dump_matrix: expects a matrix, got " + m.shape().str());
    char buf[64];
    for (int i = 0; i < m.n1(); ++i) {
        for (int j = 0; j < m.n2(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m.at(i, j, 0));
            os << buf;
            if (j + 1 < m.n2()) os << ',';
        }
        os << '\n';
    }
}

DenseTensor csv_read_matrix(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("csv_read_matrix: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return DenseTensor();
    DenseTensor out({static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), 1});
    for (int i = 0; i < out.n1(); ++i)
        for (int j = 0; j < out.n2(); ++j) out.at(i, j, 0) = rows[i][j];
    return out;
}

} // namespace cobot
