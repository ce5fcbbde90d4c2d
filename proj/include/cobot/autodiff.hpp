#pragma once

#include <deque>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cobot/tensor.hpp"

namespace cobot {

class Tape;

// Handle into a tape node. Cheap to copy; valid as long as the tape lives.
struct Variable {
    Tape* tape = nullptr;
    int id = -1;

    const DenseTensor& value() const;
    const DenseTensor& grad() const;
    bool requires_grad() const;
    const Shape& shape() const;
};

// Reverse-mode tape. One tape per training step; recording order is the
// topological order and backward() walks it in exact reverse. Adjoints are
// computed into a fresh scratch buffer each call and then added onto the
// persistent node gradients, so repeated backward() calls accumulate and
// nodes off the path to the loss keep an exactly-zero gradient.
class Tape {
public:
    using Pullback = std::function<void(Tape&, int self, std::vector<DenseTensor>& adjoint)>;

    Variable leaf(DenseTensor value, bool requires_grad);
    Variable constant(DenseTensor value) { return leaf(std::move(value), false); }

    // Records a node with an explicit pullback; also the hook for test
    // fixtures that need a deliberately wrong pullback.
    Variable custom(DenseTensor value, std::vector<int> parents, Pullback pullback,
                    const char* name);

    void backward(Variable loss);

    const DenseTensor& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const DenseTensor& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    bool requires_grad_of(int id) const {
        return nodes_[static_cast<std::size_t>(id)].requires_grad;
    }
    const char* name_of(int id) const { return nodes_[static_cast<std::size_t>(id)].name; }
    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        DenseTensor value;
        DenseTensor grad; // same shape as value, zero until backward
        bool requires_grad = false;
        Pullback pullback; // empty for leaves and no-grad nodes
        const char* name = "";
    };
    // deque: references handed out through value()/grad() stay valid as the
    // tape grows
    std::deque<Node> nodes_;

    friend void accumulate_adjoint(std::vector<DenseTensor>& adj, const Tape& tape, int id,
                                   const DenseTensor& delta);
};

// ---- operator set ----
Variable add(Variable a, Variable b);
Variable sub(Variable a, Variable b);
Variable scale(Variable a, double c);
Variable hadamard(Variable a, Variable b);
Variable matmul(Variable a, Variable b);    // (n,k,1)x(k,m,1)
Variable matmul_nt(Variable a, Variable b); // A * B^T
Variable add_rowvec(Variable x, Variable b);
Variable relu(Variable x);
Variable gelu(Variable x); // tanh approximation
Variable sigmoid(Variable x);
Variable softmax_rows(Variable x); // across n2, per row and slice
Variable layernorm(Variable x, Variable gamma, Variable beta, double eps = 1e-5);
Variable mean(Variable x); // -> (1,1,1)
Variable sum(Variable x);  // -> (1,1,1)
Variable reshape(Variable x, Shape s);
Variable bmm_nn(Variable a, Variable b); // slice-wise A^(i) B^(i)
Variable bmm_nt(Variable a, Variable b); // slice-wise A^(i) B^(i)T
Variable scale_columns(Variable x, Variable lam);         // x (n,v,1), lam (1,v,1)
Variable slice_mix(Variable s, Variable base);            // (L,L,1)x(L,v,1) coefficient mixing
Variable quat_weights(Variable bank);                     // (4,m,1) -> block-diagonal (4m,4m,1)
Variable stack_rows(std::span<const Variable> rows);      // k x (1,v,1) -> (k,v,1)
Variable take_row(Variable x, int row);                   // (n,v,1) -> (1,v,1)
Variable bce_with_logits(Variable z, const DenseTensor& target); // mean, stable form
Variable dice_from_probs(Variable p, const DenseTensor& target, double eps = 1e-6);

// ---- finite-difference gradient checking ----
struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
    std::string note; // non-finite locations etc.
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    bool all_pass() const;
    void write_jsonl(std::ostream& os) const;
};

// f rebuilds the computation on the given tape from the supplied leaves and
// returns the scalar loss. Central differences with per-entry step
// h_i = h * (1 + |x_i|); relative error |g_ad - g_fd| / (|g_ad| + |g_fd| + 1e-12).
using GradFn = std::function<Variable(Tape&, const std::vector<Variable>&)>;
GradCheckReport grad_check(const GradFn& f,
                           const std::vector<std::pair<std::string, DenseTensor>>& inputs,
                           double h = 1e-6, double tol = 1e-5);

} // namespace cobot
