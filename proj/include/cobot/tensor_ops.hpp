#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include "cobot/tensor.hpp"

namespace cobot {

// ---- dense matrix kernels (n3 == 1 operands) ----
DenseTensor mm_nn(const DenseTensor& a, const DenseTensor& b); // A * B
DenseTensor mm_nt(const DenseTensor& a, const DenseTensor& b); // A * B^T
DenseTensor mm_tn(const DenseTensor& a, const DenseTensor& b); // A^T * B
void mm_nn_acc(const DenseTensor& a, const DenseTensor& b, DenseTensor& out); // out += A*B
void mm_nt_acc(const DenseTensor& a, const DenseTensor& b, DenseTensor& out);
void mm_tn_acc(const DenseTensor& a, const DenseTensor& b, DenseTensor& out);
DenseTensor transpose(const DenseTensor& a);

// ---- frontal-slice tensor algebra ----

// stacks frontal slices vertically: (n1,n2,n3) -> (n1*n3, n2, 1)
DenseTensor unfold3(const DenseTensor& a);
// inverse of unfold3; bit-exact round trip
DenseTensor fold3(const DenseTensor& m, Shape shape);

// block-circulant matrix whose first block-column is unfold3(a);
// block (i,j) is slice ((i-j) mod n3)
DenseTensor bcirc(const DenseTensor& a);

// C = fold(bcirc(A) . unfold(B)); A (n1,n2,n3), B (n2,l,n3) -> (n1,l,n3)
DenseTensor t_product(const DenseTensor& a, const DenseTensor& b);

// out slice k = sum_l s(k,l) * t[:,:,l]; s is (m, n3, 1)
DenseTensor mode3_product(const DenseTensor& t, const DenseTensor& s);

// C^(i) = A^(i) * B^(i)
DenseTensor slicewise_product(const DenseTensor& a, const DenseTensor& b);

// Square complex matrix, row-major; carrier for the transform-domain path.
struct ComplexMatrix {
    int n = 0;
    std::vector<std::complex<double>> a;

    ComplexMatrix() = default;
    explicit ComplexMatrix(int n_) : n(n_), a(static_cast<std::size_t>(n_) * n_) {}
    std::complex<double>& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
    const std::complex<double>& at(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

ComplexMatrix dft_matrix(int n);
ComplexMatrix complex_inverse(const ComplexMatrix& m); // Gauss-Jordan, partial pivoting

// Transform-domain product: apply the invertible mode-3 transform to both
// operands, multiply slice-wise, transform back. With the DFT transform this
// equals t_product; disagreement (imaginary residue above tol, relative to
// the result magnitude) is reported as an error.
DenseTensor transform_domain_tproduct(const DenseTensor& a, const DenseTensor& b,
                                      const ComplexMatrix& s_dft, double imag_tol = 1e-9);

// 1-norm condition estimate ||S||_1 * ||S^-1||_1 of a square matrix;
// +inf when singular to machine precision.
double condition_estimate(const DenseTensor& square);

// row-major CSV, 17 significant digits per entry
void csv_dump_matrix(const DenseTensor& m, std::ostream& os);
DenseTensor csv_read_matrix(std::istream& is);

} // namespace cobot
