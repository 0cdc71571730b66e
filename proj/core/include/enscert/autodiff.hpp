#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "enscert/model.hpp"
#include "enscert/tensor.hpp"

namespace enscert::autodiff {

using NodeId = int32_t;

/// Primitive set of the computation graph. The set is closed under the
/// derivatives needed for parameter gradients of input-gradient expressions:
/// Sigmoid is the softplus derivative and TanhPrime the tanh derivative, and
/// both are primitives with their own derivative rules.
enum class Op : uint8_t {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,        // elementwise
    MatVec,     // M x
    MatTVec,    // M^T x
    Sum,        // sum of all entries -> scalar
    Neg,
    Exp,
    Log,
    Softplus,
    Sigmoid,
    Tanh,
    TanhPrime,  // 1 - tanh^2
    L2Norm,     // -> scalar
    DivScalar,  // tensor / scalar node
    ScalarMul,  // scalar node * tensor
};

/// Leaf adjoints accumulated by a reverse sweep. Every leaf of the graph
/// appears exactly once; leaves the output does not depend on carry zero
/// tensors.
struct GradientMap {
    std::vector<NodeId> leaves;
    std::vector<Tensor> adjoints;
    size_t node_visits = 0;  // reverse-sweep work, for linearity checks

    const Tensor& at(NodeId leaf) const;
};

/// Append-only computation graph. Construction order is topological order;
/// values are computed eagerly so builders can embed value-dependent
/// constants (e.g. softmax shifts).
class Graph {
  public:
    NodeId leaf(Tensor value);
    NodeId constant(Tensor value);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId matvec(NodeId m, NodeId v);
    NodeId matvec_t(NodeId m, NodeId v);
    NodeId sum(NodeId a);
    NodeId neg(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId softplus(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId tanh(NodeId a);
    NodeId tanh_prime(NodeId a);
    NodeId l2_norm(NodeId a);
    NodeId div_scalar(NodeId v, NodeId s);
    NodeId scalar_mul(NodeId s, NodeId v);

    /// sum(v .* one_hot(i)): scalar component pick built from primitives.
    NodeId pick(NodeId v, int index);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    bool is_leaf(NodeId id) const { return nodes_[id].op == Op::Leaf; }
    size_t node_count() const { return nodes_.size(); }

    void set_leaf(NodeId id, Tensor value);
    /// Replays the forward pass in construction order after leaf mutation.
    void recompute();

    /// Reverse sweep from a scalar output. Throws std::invalid_argument if
    /// the output node is not scalar.
    GradientMap backward(NodeId output) const;

  private:
    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        int index = -1;  // payload for pick-style constants (unused otherwise)
        Tensor value;
    };

    NodeId push(Node n);
    void eval(Node& n) const;

    std::vector<Node> nodes_;
};

/// Graph leaves for one classifier's parameters.
struct BoundMlp {
    const model::MlpClassifier* source = nullptr;
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;
};

/// Registers every layer's weight matrix and bias vector as graph leaves,
/// initialized from the classifier's current parameters.
BoundMlp bind_mlp(Graph& g, const model::MlpClassifier& m);

/// Writes accumulated leaf adjoints back into per-layer tensors matching the
/// classifier's parameter shapes.
struct MlpGradients {
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
};
MlpGradients collect_mlp_gradients(const BoundMlp& bm, const GradientMap& gm);

/// Forward pass nodes of one classifier on input x.
struct MlpForward {
    std::vector<NodeId> pre_activations;  // z_l for each layer
    NodeId logits = -1;
    NodeId probs = -1;  // numerically shifted softmax
};
MlpForward mlp_forward(Graph& g, const BoundMlp& bm, NodeId x);

/// Confidence margin node f_{y1} - f_{y2}.
NodeId margin_node(Graph& g, const MlpForward& fwd, int y1, int y2);

/// Cross-entropy node -log f_{y}(x), evaluated in shifted log-softmax form.
NodeId cross_entropy_node(Graph& g, const MlpForward& fwd, int y);

/// J_x(logits)^T seed: the input gradient of seed^T logits pulled through the
/// layerwise chain of transposed-weight products and activation-derivative
/// scalings. Differentiable with respect to the bound parameters.
NodeId input_gradient_with_seed(Graph& g, const BoundMlp& bm, const MlpForward& fwd,
                                NodeId x, NodeId seed);

/// Input gradient of the confidence margin f^{y1/y2}: the softmax-margin
/// Jacobian row composed with the layerwise chain above. Class indices are
/// frozen constants (no gradient flows through index selection).
NodeId input_gradient_node(Graph& g, const BoundMlp& bm, const MlpForward& fwd,
                           NodeId x, int y1, int y2);

/// Convenience overload: binds the model, runs the forward pass and returns
/// the margin input-gradient node.
NodeId input_gradient_node(Graph& g, const model::MlpClassifier& m, NodeId x,
                           int y1, int y2);

/// Max relative error between reverse-mode adjoints and central finite
/// differences over the given leaves. Relative error uses denominator
/// max(|a|, |b|, 1e-8).
double gradient_check(Graph& g, NodeId output, std::span<const NodeId> leaves, double h);

}  // namespace enscert::autodiff
