#include "enscert/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace enscert::autodiff {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

const Tensor& GradientMap::at(NodeId leaf) const {
    for (size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i] == leaf) return adjoints[i];
    }
    throw std::out_of_range("GradientMap: node is not a leaf of the graph");
}

NodeId Graph::push(Node n) {
    eval(n);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::leaf(Tensor value) { return push(Node{Op::Leaf, -1, -1, -1, std::move(value)}); }
NodeId Graph::constant(Tensor value) {
    return push(Node{Op::Constant, -1, -1, -1, std::move(value)});
}

NodeId Graph::add(NodeId a, NodeId b) {
    require(nodes_[a].value.same_shape(nodes_[b].value), "add: shape mismatch");
    return push(Node{Op::Add, a, b, -1, {}});
}
NodeId Graph::sub(NodeId a, NodeId b) {
    require(nodes_[a].value.same_shape(nodes_[b].value), "sub: shape mismatch");
    return push(Node{Op::Sub, a, b, -1, {}});
}
NodeId Graph::mul(NodeId a, NodeId b) {
    require(nodes_[a].value.same_shape(nodes_[b].value), "mul: shape mismatch");
    return push(Node{Op::Mul, a, b, -1, {}});
}
NodeId Graph::matvec(NodeId m, NodeId v) {
    require(nodes_[v].value.cols == 1, "matvec: v must be a column vector");
    require(nodes_[m].value.cols == nodes_[v].value.rows, "matvec: shape mismatch");
    return push(Node{Op::MatVec, m, v, -1, {}});
}
NodeId Graph::matvec_t(NodeId m, NodeId v) {
    require(nodes_[v].value.cols == 1, "matvec_t: v must be a column vector");
    require(nodes_[m].value.rows == nodes_[v].value.rows, "matvec_t: shape mismatch");
    return push(Node{Op::MatTVec, m, v, -1, {}});
}
NodeId Graph::sum(NodeId a) { return push(Node{Op::Sum, a, -1, -1, {}}); }
NodeId Graph::neg(NodeId a) { return push(Node{Op::Neg, a, -1, -1, {}}); }
NodeId Graph::exp(NodeId a) { return push(Node{Op::Exp, a, -1, -1, {}}); }
NodeId Graph::log(NodeId a) { return push(Node{Op::Log, a, -1, -1, {}}); }
NodeId Graph::softplus(NodeId a) { return push(Node{Op::Softplus, a, -1, -1, {}}); }
NodeId Graph::sigmoid(NodeId a) { return push(Node{Op::Sigmoid, a, -1, -1, {}}); }
NodeId Graph::tanh(NodeId a) { return push(Node{Op::Tanh, a, -1, -1, {}}); }
NodeId Graph::tanh_prime(NodeId a) { return push(Node{Op::TanhPrime, a, -1, -1, {}}); }
NodeId Graph::l2_norm(NodeId a) { return push(Node{Op::L2Norm, a, -1, -1, {}}); }
NodeId Graph::div_scalar(NodeId v, NodeId s) {
    require(nodes_[s].value.is_scalar(), "div_scalar: divisor must be scalar");
    return push(Node{Op::DivScalar, v, s, -1, {}});
}
NodeId Graph::scalar_mul(NodeId s, NodeId v) {
    require(nodes_[s].value.is_scalar(), "scalar_mul: multiplier must be scalar");
    return push(Node{Op::ScalarMul, s, v, -1, {}});
}

NodeId Graph::pick(NodeId v, int index) {
    const Tensor& t = nodes_[v].value;
    require(t.cols == 1, "pick: expects a column vector");
    require(index >= 0 && index < t.rows, "pick: index out of range");
    const NodeId hot = constant(Tensor::one_hot(t.rows, index));
    return sum(mul(v, hot));
}

void Graph::set_leaf(NodeId id, Tensor value) {
    require(nodes_[id].op == Op::Leaf, "set_leaf: node is not a leaf");
    require(nodes_[id].value.same_shape(value), "set_leaf: shape change not allowed");
    nodes_[id].value = std::move(value);
}

void Graph::recompute() {
    for (auto& n : nodes_) {
        if (n.op == Op::Leaf || n.op == Op::Constant) continue;
        eval(n);
    }
}

void Graph::eval(Node& n) const {
    switch (n.op) {
        case Op::Leaf:
        case Op::Constant:
            return;
        case Op::Add: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            n.value = a;
            for (size_t i = 0; i < a.size(); ++i) n.value.v[i] += b.v[i];
            return;
        }
        case Op::Sub: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            n.value = a;
            for (size_t i = 0; i < a.size(); ++i) n.value.v[i] -= b.v[i];
            return;
        }
        case Op::Mul: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            n.value = a;
            for (size_t i = 0; i < a.size(); ++i) n.value.v[i] *= b.v[i];
            return;
        }
        case Op::MatVec: {
            const Tensor& m = nodes_[n.a].value;
            const Tensor& v = nodes_[n.b].value;
            n.value = Tensor(m.rows, 1);
            matvec_into(m, v.v.data(), n.value.v.data());
            return;
        }
        case Op::MatTVec: {
            const Tensor& m = nodes_[n.a].value;
            const Tensor& v = nodes_[n.b].value;
            n.value = Tensor(m.cols, 1);
            matvec_transposed_into(m, v.v.data(), n.value.v.data());
            return;
        }
        case Op::Sum: {
            double acc = 0.0;
            for (double x : nodes_[n.a].value.v) acc += x;
            n.value = Tensor::scalar(acc);
            return;
        }
        case Op::Neg: {
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) x = -x;
            return;
        }
        case Op::Exp: {
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) x = std::exp(x);
            return;
        }
        case Op::Log: {
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) x = std::log(x);
            return;
        }
        case Op::Softplus: {
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) x = model::softplus(x);
            return;
        }
        case Op::Sigmoid: {
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) x = model::sigmoid(x);
            return;
        }
        case Op::Tanh: {
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) x = std::tanh(x);
            return;
        }
        case Op::TanhPrime: {
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) {
                const double t = std::tanh(x);
                x = 1.0 - t * t;
            }
            return;
        }
        case Op::L2Norm: {
            double acc = 0.0;
            for (double x : nodes_[n.a].value.v) acc += x * x;
            n.value = Tensor::scalar(std::sqrt(acc));
            return;
        }
        case Op::DivScalar: {
            const double s = nodes_[n.b].value.v[0];
            n.value = nodes_[n.a].value;
            for (auto& x : n.value.v) x /= s;
            return;
        }
        case Op::ScalarMul: {
            const double s = nodes_[n.a].value.v[0];
            n.value = nodes_[n.b].value;
            for (auto& x : n.value.v) x *= s;
            return;
        }
    }
    throw std::logic_error("eval: unknown op");
}

GradientMap Graph::backward(NodeId output) const {
    require(output >= 0 && output < static_cast<NodeId>(nodes_.size()),
            "backward: node id out of range");
    if (!nodes_[output].value.is_scalar()) {
        throw std::invalid_argument("backward: output must be a scalar node");
    }

    std::vector<Tensor> adj(nodes_.size());
    std::vector<bool> live(nodes_.size(), false);
    auto ensure = [&](NodeId id) -> Tensor& {
        if (!live[id]) {
            const Tensor& v = nodes_[id].value;
            adj[id] = Tensor(v.rows, v.cols);
            live[id] = true;
        }
        return adj[id];
    };

    ensure(output).v[0] = 1.0;
    size_t visits = 0;

    for (NodeId id = output; id >= 0; --id) {
        if (!live[id]) continue;
        ++visits;
        const Node& n = nodes_[id];
        const Tensor& g = adj[id];
        switch (n.op) {
            case Op::Leaf:
            case Op::Constant:
                break;
            case Op::Add: {
                Tensor& da = ensure(n.a);
                Tensor& db = ensure(n.b);
                for (size_t i = 0; i < g.size(); ++i) {
                    da.v[i] += g.v[i];
                    db.v[i] += g.v[i];
                }
                break;
            }
            case Op::Sub: {
                Tensor& da = ensure(n.a);
                Tensor& db = ensure(n.b);
                for (size_t i = 0; i < g.size(); ++i) {
                    da.v[i] += g.v[i];
                    db.v[i] -= g.v[i];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& a = nodes_[n.a].value;
                const Tensor& b = nodes_[n.b].value;
                Tensor& da = ensure(n.a);
                Tensor& db = ensure(n.b);
                for (size_t i = 0; i < g.size(); ++i) {
                    da.v[i] += g.v[i] * b.v[i];
                    db.v[i] += g.v[i] * a.v[i];
                }
                break;
            }
            case Op::MatVec: {
                const Tensor& m = nodes_[n.a].value;
                const Tensor& v = nodes_[n.b].value;
                Tensor& dm = ensure(n.a);
                Tensor& dv = ensure(n.b);
                for (int r = 0; r < m.rows; ++r) {
                    const double gr = g.v[r];
                    for (int c = 0; c < m.cols; ++c) {
                        dm.at(r, c) += gr * v.v[c];
                        dv.v[c] += gr * m.at(r, c);
                    }
                }
                break;
            }
            case Op::MatTVec: {
                // value = M^T v; d/dM = v g^T, d/dv = M g
                const Tensor& m = nodes_[n.a].value;
                const Tensor& v = nodes_[n.b].value;
                Tensor& dm = ensure(n.a);
                Tensor& dv = ensure(n.b);
                for (int r = 0; r < m.rows; ++r) {
                    const double vr = v.v[r];
                    double acc = 0.0;
                    for (int c = 0; c < m.cols; ++c) {
                        dm.at(r, c) += vr * g.v[c];
                        acc += m.at(r, c) * g.v[c];
                    }
                    dv.v[r] += acc;
                }
                break;
            }
            case Op::Sum: {
                Tensor& da = ensure(n.a);
                const double gs = g.v[0];
                for (auto& x : da.v) x += gs;
                break;
            }
            case Op::Neg: {
                Tensor& da = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) da.v[i] -= g.v[i];
                break;
            }
            case Op::Exp: {
                Tensor& da = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) da.v[i] += g.v[i] * n.value.v[i];
                break;
            }
            case Op::Log: {
                const Tensor& a = nodes_[n.a].value;
                Tensor& da = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) da.v[i] += g.v[i] / a.v[i];
                break;
            }
            case Op::Softplus: {
                const Tensor& a = nodes_[n.a].value;
                Tensor& da = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i)
                    da.v[i] += g.v[i] * model::sigmoid(a.v[i]);
                break;
            }
            case Op::Sigmoid: {
                Tensor& da = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) {
                    const double s = n.value.v[i];
                    da.v[i] += g.v[i] * s * (1.0 - s);
                }
                break;
            }
            case Op::Tanh: {
                Tensor& da = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) {
                    const double t = n.value.v[i];
                    da.v[i] += g.v[i] * (1.0 - t * t);
                }
                break;
            }
            case Op::TanhPrime: {
                const Tensor& a = nodes_[n.a].value;
                Tensor& da = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) {
                    const double t = std::tanh(a.v[i]);
                    da.v[i] += g.v[i] * (-2.0 * t * (1.0 - t * t));
                }
                break;
            }
            case Op::L2Norm: {
                const Tensor& a = nodes_[n.a].value;
                const double norm = n.value.v[0];
                if (norm > 1e-300) {
                    Tensor& da = ensure(n.a);
                    const double gs = g.v[0] / norm;
                    for (size_t i = 0; i < a.size(); ++i) da.v[i] += gs * a.v[i];
                }
                break;
            }
            case Op::DivScalar: {
                const Tensor& v = nodes_[n.a].value;
                const double s = nodes_[n.b].value.v[0];
                Tensor& dv = ensure(n.a);
                Tensor& ds = ensure(n.b);
                double acc = 0.0;
                for (size_t i = 0; i < g.size(); ++i) {
                    dv.v[i] += g.v[i] / s;
                    acc += g.v[i] * v.v[i];
                }
                ds.v[0] -= acc / (s * s);
                break;
            }
            case Op::ScalarMul: {
                const double s = nodes_[n.a].value.v[0];
                const Tensor& v = nodes_[n.b].value;
                Tensor& ds = ensure(n.a);
                Tensor& dv = ensure(n.b);
                double acc = 0.0;
                for (size_t i = 0; i < g.size(); ++i) {
                    dv.v[i] += g.v[i] * s;
                    acc += g.v[i] * v.v[i];
                }
                ds.v[0] += acc;
                break;
            }
        }
    }

    GradientMap gm;
    gm.node_visits = visits;
    for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
        if (nodes_[id].op != Op::Leaf) continue;
        gm.leaves.push_back(id);
        if (live[id]) {
            gm.adjoints.push_back(std::move(adj[id]));
        } else {
            const Tensor& v = nodes_[id].value;
            gm.adjoints.push_back(Tensor(v.rows, v.cols));
        }
    }
    return gm;
}

BoundMlp bind_mlp(Graph& g, const model::MlpClassifier& m) {
    BoundMlp bm;
    bm.source = &m;
    for (const auto& l : m.layers()) {
        bm.weights.push_back(g.leaf(l.w));
        bm.biases.push_back(g.leaf(Tensor::column(l.b)));
    }
    return bm;
}

MlpGradients collect_mlp_gradients(const BoundMlp& bm, const GradientMap& gm) {
    MlpGradients out;
    for (size_t i = 0; i < bm.weights.size(); ++i) {
        out.weights.push_back(gm.at(bm.weights[i]));
        out.biases.push_back(gm.at(bm.biases[i]));
    }
    return out;
}

MlpForward mlp_forward(Graph& g, const BoundMlp& bm, NodeId x) {
    const model::Activation act = bm.source->activation();
    MlpForward fwd;
    NodeId cur = x;
    const size_t n_layers = bm.weights.size();
    for (size_t li = 0; li < n_layers; ++li) {
        const NodeId z = g.add(g.matvec(bm.weights[li], cur), bm.biases[li]);
        fwd.pre_activations.push_back(z);
        if (li + 1 < n_layers) {
            cur = act == model::Activation::Softplus ? g.softplus(z) : g.tanh(z);
        } else {
            cur = z;
        }
    }
    fwd.logits = cur;

    // Stable softmax: the shift is a build-time constant; softmax translation
    // invariance keeps value and derivatives exact after recompute().
    const Tensor& z = g.value(fwd.logits);
    double mx = z.v[0];
    for (double v : z.v) mx = std::max(mx, v);
    const NodeId shifted = g.sub(fwd.logits, g.constant(Tensor::full(z.rows, 1, mx)));
    const NodeId e = g.exp(shifted);
    fwd.probs = g.div_scalar(e, g.sum(e));
    return fwd;
}

NodeId margin_node(Graph& g, const MlpForward& fwd, int y1, int y2) {
    return g.sub(g.pick(fwd.probs, y1), g.pick(fwd.probs, y2));
}

NodeId cross_entropy_node(Graph& g, const MlpForward& fwd, int y) {
    const Tensor& z = g.value(fwd.logits);
    double mx = z.v[0];
    for (double v : z.v) mx = std::max(mx, v);
    const NodeId shifted = g.sub(fwd.logits, g.constant(Tensor::full(z.rows, 1, mx)));
    const NodeId lse = g.log(g.sum(g.exp(shifted)));
    return g.sub(lse, g.pick(shifted, y));
}

NodeId input_gradient_with_seed(Graph& g, const BoundMlp& bm, const MlpForward& fwd,
                                NodeId x, NodeId seed) {
    (void)x;
    const model::Activation act = bm.source->activation();
    NodeId v = seed;
    for (int li = static_cast<int>(bm.weights.size()) - 1; li >= 0; --li) {
        v = g.matvec_t(bm.weights[li], v);
        if (li > 0) {
            const NodeId z = fwd.pre_activations[li - 1];
            const NodeId d =
                act == model::Activation::Softplus ? g.sigmoid(z) : g.tanh_prime(z);
            v = g.mul(d, v);
        }
    }
    return v;
}

NodeId input_gradient_node(Graph& g, const BoundMlp& bm, const MlpForward& fwd,
                           NodeId x, int y1, int y2) {
    if (y1 == y2) throw std::invalid_argument("input_gradient_node: y1 must differ from y2");
    const NodeId f = fwd.probs;
    const int c = g.value(f).rows;
    const NodeId py1 = g.pick(f, y1);
    const NodeId py2 = g.pick(f, y2);
    // d(f_{y1} - f_{y2})/dz = f_{y1} e_{y1} - f_{y2} e_{y2} - (f_{y1} - f_{y2}) f
    const NodeId seed = g.sub(
        g.sub(g.scalar_mul(py1, g.constant(Tensor::one_hot(c, y1))),
              g.scalar_mul(py2, g.constant(Tensor::one_hot(c, y2)))),
        g.scalar_mul(g.sub(py1, py2), f));
    return input_gradient_with_seed(g, bm, fwd, x, seed);
}

NodeId input_gradient_node(Graph& g, const model::MlpClassifier& m, NodeId x,
                           int y1, int y2) {
    const BoundMlp bm = bind_mlp(g, m);
    const MlpForward fwd = mlp_forward(g, bm, x);
    return input_gradient_node(g, bm, fwd, x, y1, y2);
}

double gradient_check(Graph& g, NodeId output, std::span<const NodeId> leaves, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("gradient_check: h must be positive");
    const GradientMap gm = g.backward(output);
    double max_err = 0.0;
    for (NodeId leaf : leaves) {
        const Tensor base = g.value(leaf);
        const Tensor& adj = gm.at(leaf);
        for (size_t i = 0; i < base.size(); ++i) {
            Tensor t = base;
            t.v[i] = base.v[i] + h;
            g.set_leaf(leaf, t);
            g.recompute();
            const double fp = g.value(output).v[0];
            t.v[i] = base.v[i] - h;
            g.set_leaf(leaf, t);
            g.recompute();
            const double fm = g.value(output).v[0];
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = adj.v[i];
            const double err =
                std::fabs(ad - fd) / std::max({std::fabs(ad), std::fabs(fd), 1e-8});
            max_err = std::max(max_err, err);
        }
        g.set_leaf(leaf, base);
    }
    g.recompute();
    return max_err;
}

}  // namespace enscert::autodiff
