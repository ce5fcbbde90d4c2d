#include "cobot/autodiff.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "cobot/hypercomplex.hpp"
#include "cobot/tensor_ops.hpp"

namespace cobot {

const DenseTensor& Variable::value() const { return tape->value_of(id); }
const DenseTensor& Variable::grad() const { return tape->grad_of(id); }
bool Variable::requires_grad() const { return tape->requires_grad_of(id); }
const Shape& Variable::shape() const { return tape->value_of(id).shape(); }

Variable Tape::leaf(DenseTensor value, bool requires_grad) {
    Node n;
    n.grad = DenseTensor(value.shape());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.name = "leaf";
    nodes_.push_back(std::move(n));
    return Variable{this, static_cast<int>(nodes_.size()) - 1};
}

Variable Tape::custom(DenseTensor value, std::vector<int> parents, Pullback pullback,
                      const char* name) {
    bool needs_grad = false;
    for (int p : parents)
        needs_grad = needs_grad || nodes_[static_cast<std::size_t>(p)].requires_grad;
    Node n;
    n.grad = DenseTensor(value.shape());
    n.value = std::move(value);
    n.requires_grad = needs_grad;
    n.name = name;
    if (needs_grad) n.pullback = std::move(pullback);
    nodes_.push_back(std::move(n));
    return Variable{this, static_cast<int>(nodes_.size()) - 1};
}

void accumulate_adjoint(std::vector<DenseTensor>& adj, const Tape& tape, int id,
                        const DenseTensor& delta) {
    auto& a = adj[static_cast<std::size_t>(id)];
    if (a.numel() == 0) a = DenseTensor(tape.value_of(id).shape());
    for (std::int64_t i = 0; i < delta.numel(); ++i) a.flat()[i] += delta.flat()[i];
}

namespace {

// adjoint of `id`, zeros if never touched
const DenseTensor& adjoint_of(std::vector<DenseTensor>& adj, Tape& tape, int id) {
    auto& a = adj[static_cast<std::size_t>(id)];
    if (a.numel() == 0) a = DenseTensor(tape.value_of(id).shape());
    return a;
}

} // namespace

void Tape::backward(Variable loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: variable from another tape");
    if (!value_of(loss.id).is_scalar())
        throw std::invalid_argument("backward: loss must be scalar-shaped (1,1,1), got " +
                                    value_of(loss.id).shape().str());

    std::vector<DenseTensor> adjoint(static_cast<std::size_t>(loss.id) + 1);
    adjoint[static_cast<std::size_t>(loss.id)] = DenseTensor::scalar(1.0);

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad) continue;
        auto& a = adjoint[static_cast<std::size_t>(id)];
        if (a.numel() == 0) continue; // not on a path to the loss
        if (n.pullback) n.pullback(*this, id, adjoint);
    }

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        auto& a = adjoint[static_cast<std::size_t>(id)];
        if (!n.requires_grad || a.numel() == 0) continue;
        for (std::int64_t i = 0; i < a.numel(); ++i) n.grad.flat()[i] += a.flat()[i];
    }
}

// ---------------------------------------------------------------- operators

namespace {

Tape& same_tape(Variable a, Variable b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw std::invalid_argument(std::string(op) + ": variables from different tapes");
    return *a.tape;
}

void require_matrix(Variable v, const char* op) {
    if (v.shape().n3 != 1)
        throw std::invalid_argument(std::string(op) + ": expects n3 == 1, got " + v.shape().str());
}

} // namespace

Variable add(Variable a, Variable b) {
    Tape& t = same_tape(a, b, "add");
    if (a.shape() != b.shape())
        throw std::invalid_argument("add: shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
    DenseTensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out.flat()[i] += b.value().flat()[i];
    const int pa = a.id, pb = b.id;
    return t.custom(std::move(out), {pa, pb},
                    [pa, pb](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        if (tp.requires_grad_of(pa)) accumulate_adjoint(adj, tp, pa, g);
                        if (tp.requires_grad_of(pb)) accumulate_adjoint(adj, tp, pb, g);
                    },
                    "add");
}

Variable sub(Variable a, Variable b) {
    Tape& t = same_tape(a, b, "sub");
    if (a.shape() != b.shape())
        throw std::invalid_argument("sub: shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
    DenseTensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out.flat()[i] -= b.value().flat()[i];
    const int pa = a.id, pb = b.id;
    return t.custom(std::move(out), {pa, pb},
                    [pa, pb](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        if (tp.requires_grad_of(pa)) accumulate_adjoint(adj, tp, pa, g);
                        if (tp.requires_grad_of(pb)) {
                            DenseTensor neg(g.shape());
                            for (std::int64_t i = 0; i < g.numel(); ++i)
                                neg.flat()[i] = -g.flat()[i];
                            accumulate_adjoint(adj, tp, pb, neg);
                        }
                    },
                    "sub");
}

Variable scale(Variable a, double c) {
    DenseTensor out = a.value();
    for (auto& v : out.flat()) v *= c;
    const int pa = a.id;
    return a.tape->custom(std::move(out), {pa},
                          [pa, c](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              DenseTensor g = adjoint_of(adj, tp, self);
                              for (auto& v : g.flat()) v *= c;
                              accumulate_adjoint(adj, tp, pa, g);
                          },
                          "scale");
}

Variable hadamard(Variable a, Variable b) {
    Tape& t = same_tape(a, b, "hadamard");
    if (a.shape() != b.shape())
        throw std::invalid_argument("hadamard: shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
    DenseTensor out = a.value();
    for (std::int64_t i = 0; i < out.numel(); ++i) out.flat()[i] *= b.value().flat()[i];
    const int pa = a.id, pb = b.id;
    return t.custom(std::move(out), {pa, pb},
                    [pa, pb](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        if (tp.requires_grad_of(pa)) {
                            DenseTensor d(g.shape());
                            const auto& bv = tp.value_of(pb);
                            for (std::int64_t i = 0; i < g.numel(); ++i)
                                d.flat()[i] = g.flat()[i] * bv.flat()[i];
                            accumulate_adjoint(adj, tp, pa, d);
                        }
                        if (tp.requires_grad_of(pb)) {
                            DenseTensor d(g.shape());
                            const auto& av = tp.value_of(pa);
                            for (std::int64_t i = 0; i < g.numel(); ++i)
                                d.flat()[i] = g.flat()[i] * av.flat()[i];
                            accumulate_adjoint(adj, tp, pb, d);
                        }
                    },
                    "hadamard");
}

Variable matmul(Variable a, Variable b) {
    Tape& t = same_tape(a, b, "matmul");
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    DenseTensor out = mm_nn(a.value(), b.value());
    const int pa = a.id, pb = b.id;
    return t.custom(std::move(out), {pa, pb},
                    [pa, pb](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        if (tp.requires_grad_of(pa))
                            accumulate_adjoint(adj, tp, pa, mm_nt(g, tp.value_of(pb)));
                        if (tp.requires_grad_of(pb))
                            accumulate_adjoint(adj, tp, pb, mm_tn(tp.value_of(pa), g));
                    },
                    "matmul");
}

Variable matmul_nt(Variable a, Variable b) {
    Tape& t = same_tape(a, b, "matmul_nt");
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    DenseTensor out = mm_nt(a.value(), b.value());
    const int pa = a.id, pb = b.id;
    return t.custom(std::move(out), {pa, pb},
                    [pa, pb](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        if (tp.requires_grad_of(pa))
                            accumulate_adjoint(adj, tp, pa, mm_nn(g, tp.value_of(pb)));
                        if (tp.requires_grad_of(pb))
                            accumulate_adjoint(adj, tp, pb, mm_tn(g, tp.value_of(pa)));
                    },
                    "matmul_nt");
}

Variable add_rowvec(Variable x, Variable b) {
    Tape& t = same_tape(x, b, "add_rowvec");
    require_matrix(x, "add_rowvec");
    if (b.shape().n1 != 1 || b.shape().n2 != x.shape().n2 || b.shape().n3 != 1)
        throw std::invalid_argument("add_rowvec: bias " + b.shape().str() +
                                    " incompatible with " + x.shape().str());
    DenseTensor out = x.value();
    const int n = out.n1(), k = out.n2();
    for (int j = 0; j < k; ++j) {
        const double bv = b.value().at(0, j);
        for (int i = 0; i < n; ++i) out.at(i, j) += bv;
    }
    const int px = x.id, pb = b.id;
    return t.custom(std::move(out), {px, pb},
                    [px, pb, n, k](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        if (tp.requires_grad_of(px)) accumulate_adjoint(adj, tp, px, g);
                        if (tp.requires_grad_of(pb)) {
                            DenseTensor d({1, k, 1});
                            for (int j = 0; j < k; ++j) {
                                double s = 0.0;
                                for (int i = 0; i < n; ++i) s += g.at(i, j);
                                d.at(0, j) = s;
                            }
                            accumulate_adjoint(adj, tp, pb, d);
                        }
                    },
                    "add_rowvec");
}

Variable relu(Variable x) {
    DenseTensor out = x.value();
    for (auto& v : out.flat()) v = v > 0.0 ? v : 0.0;
    const int px = x.id;
    return x.tape->custom(std::move(out), {px},
                          [px](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const DenseTensor& g = adjoint_of(adj, tp, self);
                              const DenseTensor& xv = tp.value_of(px);
                              DenseTensor d(g.shape());
                              for (std::int64_t i = 0; i < g.numel(); ++i)
                                  d.flat()[i] = xv.flat()[i] > 0.0 ? g.flat()[i] : 0.0;
                              accumulate_adjoint(adj, tp, px, d);
                          },
                          "relu");
}

namespace {
constexpr double kGeluC = 0.79788456080286535588; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
} // namespace

Variable gelu(Variable x) {
    DenseTensor out = x.value();
    for (auto& v : out.flat()) {
        const double u = kGeluC * (v + kGeluA * v * v * v);
        v = 0.5 * v * (1.0 + std::tanh(u));
    }
    const int px = x.id;
    return x.tape->custom(std::move(out), {px},
                          [px](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const DenseTensor& g = adjoint_of(adj, tp, self);
                              const DenseTensor& xv = tp.value_of(px);
                              DenseTensor d(g.shape());
                              for (std::int64_t i = 0; i < g.numel(); ++i) {
                                  const double v = xv.flat()[i];
                                  const double u = kGeluC * (v + kGeluA * v * v * v);
                                  const double th = std::tanh(u);
                                  const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
                                  const double dy = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
                                  d.flat()[i] = g.flat()[i] * dy;
                              }
                              accumulate_adjoint(adj, tp, px, d);
                          },
                          "gelu");
}

namespace {
double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
} // namespace

Variable sigmoid(Variable x) {
    DenseTensor out = x.value();
    for (auto& v : out.flat()) v = stable_sigmoid(v);
    const int px = x.id;
    // pullback reads the produced value through the self node
    return x.tape->custom(std::move(out), {px},
                          [px](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const DenseTensor& g = adjoint_of(adj, tp, self);
                              const DenseTensor& y = tp.value_of(self);
                              DenseTensor d(g.shape());
                              for (std::int64_t i = 0; i < g.numel(); ++i) {
                                  const double s = y.flat()[i];
                                  d.flat()[i] = g.flat()[i] * s * (1.0 - s);
                              }
                              accumulate_adjoint(adj, tp, px, d);
                          },
                          "sigmoid");
}

Variable softmax_rows(Variable x) {
    DenseTensor out = x.value();
    const int n1 = out.n1(), n2 = out.n2(), n3 = out.n3();
    for (int k = 0; k < n3; ++k)
        for (int i = 0; i < n1; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n2; ++j) mx = std::max(mx, out.at(i, j, k));
            double z = 0.0;
            for (int j = 0; j < n2; ++j) z += std::exp(out.at(i, j, k) - mx);
            for (int j = 0; j < n2; ++j) out.at(i, j, k) = std::exp(out.at(i, j, k) - mx) / z;
        }
    const int px = x.id;
    return x.tape->custom(std::move(out), {px},
                          [px, n1, n2, n3](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const DenseTensor& g = adjoint_of(adj, tp, self);
                              const DenseTensor& y = tp.value_of(self);
                              DenseTensor d(g.shape());
                              for (int k = 0; k < n3; ++k)
                                  for (int i = 0; i < n1; ++i) {
                                      double dot = 0.0;
                                      for (int j = 0; j < n2; ++j)
                                          dot += g.at(i, j, k) * y.at(i, j, k);
                                      for (int j = 0; j < n2; ++j)
                                          d.at(i, j, k) =
                                              (g.at(i, j, k) - dot) * y.at(i, j, k);
                                  }
                              accumulate_adjoint(adj, tp, px, d);
                          },
                          "softmax_rows");
}

Variable layernorm(Variable x, Variable gamma, Variable beta, double eps) {
    Tape& t = same_tape(x, gamma, "layernorm");
    same_tape(gamma, beta, "layernorm");
    require_matrix(x, "layernorm");
    const int n = x.shape().n1, k = x.shape().n2;
    if (gamma.shape() != Shape{1, k, 1} || beta.shape() != Shape{1, k, 1})
        throw std::invalid_argument("layernorm: gamma/beta must be (1," + std::to_string(k) +
                                    ",1)");

    // cache normalized rows and inverse stddev for the pullback
    DenseTensor xhat({n, k, 1});
    std::vector<double> inv_sd(static_cast<std::size_t>(n));
    DenseTensor out({n, k, 1});
    const auto& xv = x.value();
    for (int i = 0; i < n; ++i) {
        double mu = 0.0;
        for (int j = 0; j < k; ++j) mu += xv.at(i, j);
        mu /= k;
        double var = 0.0;
        for (int j = 0; j < k; ++j) {
            const double c = xv.at(i, j) - mu;
            var += c * c;
        }
        var /= k;
        const double isd = 1.0 / std::sqrt(var + eps);
        inv_sd[static_cast<std::size_t>(i)] = isd;
        for (int j = 0; j < k; ++j) {
            const double h = (xv.at(i, j) - mu) * isd;
            xhat.at(i, j) = h;
            out.at(i, j) = h * gamma.value().at(0, j) + beta.value().at(0, j);
        }
    }

    const int px = x.id, pg = gamma.id, pb = beta.id;
    return t.custom(
        std::move(out), {px, pg, pb},
        [px, pg, pb, n, k, xhat = std::move(xhat), inv_sd = std::move(inv_sd)](
            Tape& tp, int self, std::vector<DenseTensor>& adj) {
            const DenseTensor& g = adjoint_of(adj, tp, self);
            if (tp.requires_grad_of(pg)) {
                DenseTensor dg({1, k, 1});
                for (int j = 0; j < k; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < n; ++i) s += g.at(i, j) * xhat.at(i, j);
                    dg.at(0, j) = s;
                }
                accumulate_adjoint(adj, tp, pg, dg);
            }
            if (tp.requires_grad_of(pb)) {
                DenseTensor db({1, k, 1});
                for (int j = 0; j < k; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < n; ++i) s += g.at(i, j);
                    db.at(0, j) = s;
                }
                accumulate_adjoint(adj, tp, pb, db);
            }
            if (tp.requires_grad_of(px)) {
                const DenseTensor& gam = tp.value_of(pg);
                DenseTensor dx({n, k, 1});
                for (int i = 0; i < n; ++i) {
                    double m1 = 0.0, m2 = 0.0; // mean(gy), mean(gy * xhat)
                    for (int j = 0; j < k; ++j) {
                        const double gy = g.at(i, j) * gam.at(0, j);
                        m1 += gy;
                        m2 += gy * xhat.at(i, j);
                    }
                    m1 /= k;
                    m2 /= k;
                    const double isd = inv_sd[static_cast<std::size_t>(i)];
                    for (int j = 0; j < k; ++j) {
                        const double gy = g.at(i, j) * gam.at(0, j);
                        dx.at(i, j) = isd * (gy - m1 - xhat.at(i, j) * m2);
                    }
                }
                accumulate_adjoint(adj, tp, px, dx);
            }
        },
        "layernorm");
}

namespace {

Variable reduce(Variable x, bool average, const char* name) {
    const auto& xv = x.value();
    double s = 0.0;
    for (double v : xv.flat()) s += v;
    const double denom = average ? static_cast<double>(xv.numel()) : 1.0;
    const int px = x.id;
    const Shape xs = xv.shape();
    return x.tape->custom(DenseTensor::scalar(s / denom), {px},
                          [px, xs, denom](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const double g = adjoint_of(adj, tp, self).flat()[0];
                              DenseTensor d(xs, g / denom);
                              accumulate_adjoint(adj, tp, px, d);
                          },
                          name);
}

} // namespace

Variable mean(Variable x) { return reduce(x, true, "mean"); }
Variable sum(Variable x) { return reduce(x, false, "sum"); }

Variable reshape(Variable x, Shape s) {
    DenseTensor out = x.value().reshaped(s);
    const int px = x.id;
    const Shape old = x.shape();
    return x.tape->custom(std::move(out), {px},
                          [px, old](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const DenseTensor& g = adjoint_of(adj, tp, self);
                              accumulate_adjoint(adj, tp, px, g.reshaped(old));
                          },
                          "reshape");
}

namespace {

enum class BmmKind { NN, NT };

Variable bmm_impl(Variable a, Variable b, BmmKind kind) {
    const char* name = kind == BmmKind::NN ? "bmm_nn" : "bmm_nt";
    Tape& t = same_tape(a, b, name);
    const Shape sa = a.shape(), sb = b.shape();
    const int inner_b = kind == BmmKind::NN ? sb.n1 : sb.n2;
    const int cols = kind == BmmKind::NN ? sb.n2 : sb.n1;
    if (sa.n3 != sb.n3 || sa.n2 != inner_b)
        throw std::invalid_argument(std::string(name) + ": incompatible " + sa.str() + " vs " +
                                    sb.str());
    DenseTensor out({sa.n1, cols, sa.n3});
    const auto& av = a.value();
    const auto& bv = b.value();
    for (int k = 0; k < sa.n3; ++k) {
        DenseTensor as({sa.n1, sa.n2, 1});
        std::copy(av.slice(k), av.slice(k) + as.numel(), as.data());
        DenseTensor bs({sb.n1, sb.n2, 1});
        std::copy(bv.slice(k), bv.slice(k) + bs.numel(), bs.data());
        DenseTensor cs = kind == BmmKind::NN ? mm_nn(as, bs) : mm_nt(as, bs);
        std::copy(cs.data(), cs.data() + cs.numel(), out.slice(k));
    }
    const int pa = a.id, pb = b.id;
    return t.custom(
        std::move(out), {pa, pb},
        [pa, pb, sa, sb, kind](Tape& tp, int self, std::vector<DenseTensor>& adj) {
            const DenseTensor& g = adjoint_of(adj, tp, self);
            const auto& av = tp.value_of(pa);
            const auto& bv = tp.value_of(pb);
            const bool need_a = tp.requires_grad_of(pa);
            const bool need_b = tp.requires_grad_of(pb);
            DenseTensor da(need_a ? sa : Shape{0, 0, 0});
            DenseTensor db(need_b ? sb : Shape{0, 0, 0});
            for (int k = 0; k < sa.n3; ++k) {
                DenseTensor gs({g.n1(), g.n2(), 1});
                std::copy(g.slice(k), g.slice(k) + gs.numel(), gs.data());
                DenseTensor as({sa.n1, sa.n2, 1});
                std::copy(av.slice(k), av.slice(k) + as.numel(), as.data());
                DenseTensor bs({sb.n1, sb.n2, 1});
                std::copy(bv.slice(k), bv.slice(k) + bs.numel(), bs.data());
                if (kind == BmmKind::NN) {
                    if (need_a) {
                        DenseTensor d = mm_nt(gs, bs);
                        std::copy(d.data(), d.data() + d.numel(), da.slice(k));
                    }
                    if (need_b) {
                        DenseTensor d = mm_tn(as, gs);
                        std::copy(d.data(), d.data() + d.numel(), db.slice(k));
                    }
                } else { // C = A B^T
                    if (need_a) {
                        DenseTensor d = mm_nn(gs, bs);
                        std::copy(d.data(), d.data() + d.numel(), da.slice(k));
                    }
                    if (need_b) {
                        DenseTensor d = mm_tn(gs, as);
                        std::copy(d.data(), d.data() + d.numel(), db.slice(k));
                    }
                }
            }
            if (need_a) accumulate_adjoint(adj, tp, pa, da);
            if (need_b) accumulate_adjoint(adj, tp, pb, db);
        },
        name);
}

} // namespace

Variable bmm_nn(Variable a, Variable b) { return bmm_impl(a, b, BmmKind::NN); }
Variable bmm_nt(Variable a, Variable b) { return bmm_impl(a, b, BmmKind::NT); }

Variable scale_columns(Variable x, Variable lam) {
    Tape& t = same_tape(x, lam, "scale_columns");
    require_matrix(x, "scale_columns");
    const int n = x.shape().n1, v = x.shape().n2;
    if (lam.shape() != Shape{1, v, 1})
        throw std::invalid_argument("scale_columns: lambda " + lam.shape().str() +
                                    " incompatible with " + x.shape().str());
    DenseTensor out = x.value();
    for (int j = 0; j < v; ++j) {
        const double l = lam.value().at(0, j);
        for (int i = 0; i < n; ++i) out.at(i, j) *= l;
    }
    const int px = x.id, pl = lam.id;
    return t.custom(std::move(out), {px, pl},
                    [px, pl, n, v](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        const auto& xv = tp.value_of(px);
                        const auto& lv = tp.value_of(pl);
                        if (tp.requires_grad_of(px)) {
                            DenseTensor d({n, v, 1});
                            for (int j = 0; j < v; ++j)
                                for (int i = 0; i < n; ++i) d.at(i, j) = g.at(i, j) * lv.at(0, j);
                            accumulate_adjoint(adj, tp, px, d);
                        }
                        if (tp.requires_grad_of(pl)) {
                            DenseTensor d({1, v, 1});
                            for (int j = 0; j < v; ++j) {
                                double s = 0.0;
                                for (int i = 0; i < n; ++i) s += g.at(i, j) * xv.at(i, j);
                                d.at(0, j) = s;
                            }
                            accumulate_adjoint(adj, tp, pl, d);
                        }
                    },
                    "scale_columns");
}

Variable slice_mix(Variable s, Variable base) {
    Tape& t = same_tape(s, base, "slice_mix");
    require_matrix(s, "slice_mix");
    require_matrix(base, "slice_mix");
    if (s.shape().n1 != s.shape().n2 || s.shape().n2 != base.shape().n1)
        throw std::invalid_argument("slice_mix: relation matrix " + s.shape().str() +
                                    " incompatible with stacked sets " + base.shape().str());
    DenseTensor out = mm_nn(s.value(), base.value());
    const int ps = s.id, pb = base.id;
    return t.custom(std::move(out), {ps, pb},
                    [ps, pb](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        if (tp.requires_grad_of(ps))
                            accumulate_adjoint(adj, tp, ps, mm_nt(g, tp.value_of(pb)));
                        if (tp.requires_grad_of(pb))
                            accumulate_adjoint(adj, tp, pb, mm_tn(tp.value_of(ps), g));
                    },
                    "slice_mix");
}

Variable quat_weights(Variable bank) {
    const auto& q = bank.value();
    DenseTensor out = quat_block_weights(q); // validates shape
    const int pq = bank.id;
    const int m = q.n2();
    return bank.tape->custom(
        std::move(out), {pq},
        [pq, m](Tape& tp, int self, std::vector<DenseTensor>& adj) {
            const DenseTensor& g = adjoint_of(adj, tp, self);
            // dW/dq_c is constant: the left-multiplication matrix of basis c
            DenseTensor d({4, m, 1});
            for (int c = 0; c < 4; ++c) {
                std::vector<double> e(4, 0.0);
                e[static_cast<std::size_t>(c)] = 1.0;
                DenseTensor basis = left_mul_matrix(Hypercomplex(e));
                for (int k = 0; k < m; ++k) {
                    double s = 0.0;
                    for (int i = 0; i < 4; ++i)
                        for (int j = 0; j < 4; ++j)
                            s += basis.at(i, j) * g.at(4 * k + i, 4 * k + j);
                    d.at(c, k) = s;
                }
            }
            accumulate_adjoint(adj, tp, pq, d);
        },
        "quat_weights");
}

Variable stack_rows(std::span<const Variable> rows) {
    if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
    Tape& t = *rows.front().tape;
    const int v = rows.front().shape().n2;
    std::vector<int> parents;
    for (const Variable& r : rows) {
        same_tape(rows.front(), r, "stack_rows");
        if (r.shape() != Shape{1, v, 1})
            throw std::invalid_argument("stack_rows: all rows must be (1," + std::to_string(v) +
                                        ",1)");
        parents.push_back(r.id);
    }
    const int l = static_cast<int>(rows.size());
    DenseTensor out({l, v, 1});
    for (int i = 0; i < l; ++i)
        for (int j = 0; j < v; ++j) out.at(i, j) = rows[static_cast<std::size_t>(i)].value().at(0, j);
    return t.custom(std::move(out), parents,
                    [parents, l, v](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                        const DenseTensor& g = adjoint_of(adj, tp, self);
                        for (int i = 0; i < l; ++i) {
                            const int p = parents[static_cast<std::size_t>(i)];
                            if (!tp.requires_grad_of(p)) continue;
                            DenseTensor d({1, v, 1});
                            for (int j = 0; j < v; ++j) d.at(0, j) = g.at(i, j);
                            accumulate_adjoint(adj, tp, p, d);
                        }
                    },
                    "stack_rows");
}

Variable take_row(Variable x, int row) {
    require_matrix(x, "take_row");
    const int n = x.shape().n1, v = x.shape().n2;
    if (row < 0 || row >= n) throw std::invalid_argument("take_row: row out of range");
    DenseTensor out({1, v, 1});
    for (int j = 0; j < v; ++j) out.at(0, j) = x.value().at(row, j);
    const int px = x.id;
    return x.tape->custom(std::move(out), {px},
                          [px, row, n, v](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const DenseTensor& g = adjoint_of(adj, tp, self);
                              DenseTensor d({n, v, 1});
                              for (int j = 0; j < v; ++j) d.at(row, j) = g.at(0, j);
                              accumulate_adjoint(adj, tp, px, d);
                          },
                          "take_row");
}

namespace {

void require_binary(const DenseTensor& t, const char* op) {
    for (double v : t.flat())
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument(std::string(op) + ": target mask must be binary");
}

} // namespace

Variable bce_with_logits(Variable z, const DenseTensor& target) {
    if (z.shape() != target.shape())
        throw std::invalid_argument("bce_with_logits: shape mismatch " + z.shape().str() +
                                    " vs " + target.shape().str());
    require_binary(target, "bce_with_logits");
    const auto& zv = z.value();
    double s = 0.0;
    for (std::int64_t i = 0; i < zv.numel(); ++i) {
        const double x = zv.flat()[i], t = target.flat()[i];
        s += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    const double n = static_cast<double>(zv.numel());
    const int pz = z.id;
    return z.tape->custom(DenseTensor::scalar(s / n), {pz},
                          [pz, target, n](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const double g = adjoint_of(adj, tp, self).flat()[0];
                              const auto& zv = tp.value_of(pz);
                              DenseTensor d(zv.shape());
                              for (std::int64_t i = 0; i < zv.numel(); ++i)
                                  d.flat()[i] =
                                      g * (stable_sigmoid(zv.flat()[i]) - target.flat()[i]) / n;
                              accumulate_adjoint(adj, tp, pz, d);
                          },
                          "bce_with_logits");
}

Variable dice_from_probs(Variable p, const DenseTensor& target, double eps) {
    if (p.shape() != target.shape())
        throw std::invalid_argument("dice_from_probs: shape mismatch " + p.shape().str() +
                                    " vs " + target.shape().str());
    require_binary(target, "dice_from_probs");
    const auto& pv = p.value();
    double inter = 0.0, psum = 0.0, tsum = 0.0;
    for (std::int64_t i = 0; i < pv.numel(); ++i) {
        inter += pv.flat()[i] * target.flat()[i];
        psum += pv.flat()[i];
        tsum += target.flat()[i];
    }
    const double a = 2.0 * inter + eps;
    const double b = psum + tsum + eps;
    const int pp = p.id;
    return p.tape->custom(DenseTensor::scalar(1.0 - a / b), {pp},
                          [pp, target, a, b](Tape& tp, int self, std::vector<DenseTensor>& adj) {
                              const double g = adjoint_of(adj, tp, self).flat()[0];
                              DenseTensor d(target.shape());
                              for (std::int64_t i = 0; i < d.numel(); ++i)
                                  d.flat()[i] = g * (a - 2.0 * target.flat()[i] * b) / (b * b);
                              accumulate_adjoint(adj, tp, pp, d);
                          },
                          "dice_from_probs");
}

// ------------------------------------------------------------- grad checking

bool GradCheckReport::all_pass() const {
    for (const auto& it : items)
        if (!it.pass) return false;
    return !items.empty();
}

void GradCheckReport::write_jsonl(std::ostream& os) const {
    for (const auto& it : items) {
        nlohmann::json j;
        j["name"] = it.name;
        j["max_rel_err"] = it.max_rel_err;
        j["pass"] = it.pass;
        if (!it.note.empty()) j["note"] = it.note;
        os << j.dump() << '\n';
    }
}

GradCheckReport grad_check(const GradFn& f,
                           const std::vector<std::pair<std::string, DenseTensor>>& inputs,
                           double h, double tol) {
    if (h < 1e-8 || h > 1e-4)
        throw std::invalid_argument("grad_check: step size must lie in [1e-8, 1e-4]");

    auto eval = [&](const std::vector<DenseTensor>& xs, bool with_grad,
                    std::vector<DenseTensor>* grads) -> double {
        Tape tape;
        std::vector<Variable> leaves;
        leaves.reserve(xs.size());
        for (const auto& x : xs) leaves.push_back(tape.leaf(x, with_grad));
        Variable loss = f(tape, leaves);
        if (!loss.value().is_scalar())
            throw std::invalid_argument("grad_check: f must return a scalar");
        if (with_grad) {
            tape.backward(loss);
            grads->clear();
            for (const Variable& l : leaves) grads->push_back(l.grad());
        }
        return loss.value().flat()[0];
    };

    std::vector<DenseTensor> xs;
    for (const auto& [name, x] : inputs) xs.push_back(x);

    std::vector<DenseTensor> g_ad;
    const double base_loss = eval(xs, true, &g_ad);

    GradCheckReport report;
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
        GradCheckItem item;
        item.name = inputs[idx].first;
        if (!std::isfinite(base_loss)) {
            item.note = "non-finite loss at base point";
            item.pass = false;
            report.items.push_back(std::move(item));
            continue;
        }
        bool ok = true;
        for (std::int64_t e = 0; e < xs[idx].numel(); ++e) {
            const double x0 = xs[idx].flat()[e];
            const double he = h * (1.0 + std::abs(x0));
            xs[idx].flat()[e] = x0 + he;
            const double lp = eval(xs, false, nullptr);
            xs[idx].flat()[e] = x0 - he;
            const double lm = eval(xs, false, nullptr);
            xs[idx].flat()[e] = x0;

            const double g_fd = (lp - lm) / (2.0 * he);
            const double g = g_ad[idx].flat()[e];
            if (!std::isfinite(g_fd) || !std::isfinite(g)) {
                item.note = "non-finite gradient at " + item.name + "[" + std::to_string(e) + "]";
                ok = false;
                break;
            }
            const double rel = std::abs(g - g_fd) / (std::abs(g) + std::abs(g_fd) + 1e-12);
            item.max_rel_err = std::max(item.max_rel_err, rel);
        }
        item.pass = ok && item.max_rel_err < tol;
        report.items.push_back(std::move(item));
    }
    return report;
}

} // namespace cobot
