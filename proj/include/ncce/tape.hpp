#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ncce/tensor.hpp"

namespace ncce {

using NodeId = std::int32_t;

enum class Reduction { sum, mean };

// Reverse-mode gradient tape. Nodes are recorded in construction order, which
// is a topological order of the compute graph; backward() walks it once in
// reverse. Gradients only flow into subgraphs that contain a parameter leaf.
class Tape {
public:
    NodeId leaf(Tensor value, bool requires_grad = false) {
        debug_check_finite(value, "tape leaf");
        NodeId id = static_cast<NodeId>(nodes_.size());
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return id;
    }

    NodeId constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& val(NodeId id) const { return nodes_[id].value; }

    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

    // Gradient of the last backward() target w.r.t. node id; zeros if none reached it.
    const Tensor& grad(NodeId id) {
        Node& n = nodes_[id];
        if (!n.grad_live) {
            n.grad = Tensor(n.value.rows, n.value.cols);
            n.grad_live = true;
        }
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    void zero_grads() {
        for (Node& n : nodes_) {
            if (n.grad_live) n.grad.fill(0.0);
        }
    }

    // Accumulates d(loss)/d(node) for every node that can reach a parameter.
    void backward(NodeId loss) {
        Node& top = nodes_[loss];
        if (top.value.size() != 1)
            throw shape_error("backward() requires a scalar loss, got " + top.value.shape_str());
        acc(loss).data[0] += 1.0;
        for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.back && n.grad_live) n.back(*this);
        }
    }

    // ---- ops ----

    // (r x k) * (k x c)
    NodeId matmul(NodeId a, NodeId b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.cols != B.rows)
            throw shape_error("matmul: " + A.shape_str() + " * " + B.shape_str());
        Tensor out(A.rows, B.cols);
        mm_acc(A, B, out);
        return push(std::move(out), requires_grad(a) || requires_grad(b), [a, b](Tape& t, NodeId self) {
            const Tensor& g = t.nodes_[self].grad;
            if (t.requires_grad(a)) mm_nt_acc(g, t.val(b), t.acc(a));      // dA += g * B^T
            if (t.requires_grad(b)) mm_tn_acc(t.val(a), g, t.acc(b));      // dB += A^T * g
        });
    }

    // Elementwise add; b may also be a 1xC bias row broadcast over a's rows.
    NodeId add(NodeId a, NodeId b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        bool broadcast = (B.rows == 1 && A.rows != 1 && B.cols == A.cols);
        if (!broadcast && !A.same_shape(B))
            throw shape_error("add: " + A.shape_str() + " + " + B.shape_str());
        Tensor out = A;
        if (broadcast) {
            for (std::size_t r = 0; r < A.rows; ++r)
                for (std::size_t c = 0; c < A.cols; ++c) out.at(r, c) += B.at(0, c);
        } else {
            for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
        }
        return push(std::move(out), requires_grad(a) || requires_grad(b),
                    [a, b, broadcast](Tape& t, NodeId self) {
            const Tensor& g = t.nodes_[self].grad;
            if (t.requires_grad(a)) {
                Tensor& ga = t.acc(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
            }
            if (t.requires_grad(b)) {
                Tensor& gb = t.acc(b);
                if (broadcast) {
                    for (std::size_t r = 0; r < g.rows; ++r)
                        for (std::size_t c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
                }
            }
        });
    }

    NodeId sub(NodeId a, NodeId b) { return add(a, scale(b, -1.0)); }

    // Elementwise product, same shapes.
    NodeId mul(NodeId a, NodeId b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (!A.same_shape(B))
            throw shape_error("mul: " + A.shape_str() + " . " + B.shape_str());
        Tensor out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
        return push(std::move(out), requires_grad(a) || requires_grad(b),
                    [a, b](Tape& t, NodeId self) {
            const Tensor& g = t.nodes_[self].grad;
            if (t.requires_grad(a)) {
                Tensor& ga = t.acc(a);
                const Tensor& B = t.val(b);
                for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * B.data[i];
            }
            if (t.requires_grad(b)) {
                Tensor& gb = t.acc(b);
                const Tensor& A = t.val(a);
                for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * A.data[i];
            }
        });
    }

    NodeId scale(NodeId a, double s) {
        Tensor out = val(a);
        for (double& v : out.data) v *= s;
        return push(std::move(out), requires_grad(a), [a, s](Tape& t, NodeId self) {
            const Tensor& g = t.nodes_[self].grad;
            if (!t.requires_grad(a)) return;
            Tensor& ga = t.acc(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += s * g.data[i];
        });
    }

    NodeId add_scalar(NodeId a, double s) {
        Tensor out = val(a);
        for (double& v : out.data) v += s;
        return push(std::move(out), requires_grad(a), [a](Tape& t, NodeId self) {
            const Tensor& g = t.nodes_[self].grad;
            if (!t.requires_grad(a)) return;
            Tensor& ga = t.acc(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        });
    }

    NodeId sigmoid(NodeId a) {
        Tensor out = val(a);
        for (double& v : out.data) {
            if (v >= 0.0) {
                v = 1.0 / (1.0 + std::exp(-v));
            } else {
                double e = std::exp(v);
                v = e / (1.0 + e);
            }
        }
        return unary_from_output(a, std::move(out), [](double y) { return y * (1.0 - y); });
    }

    NodeId tanh(NodeId a) {
        Tensor out = val(a);
        for (double& v : out.data) v = std::tanh(v);
        return unary_from_output(a, std::move(out), [](double y) { return 1.0 - y * y; });
    }

    NodeId relu(NodeId a) {
        Tensor out = val(a);
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        return unary_from_output(a, std::move(out), [](double y) { return y > 0.0 ? 1.0 : 0.0; });
    }

    // Row-wise softmax; every output row is a probability simplex point.
    NodeId softmax_rows(NodeId a) {
        Tensor out = val(a);
        for (std::size_t r = 0; r < out.rows; ++r) {
            double mx = out.at(r, 0);
            for (std::size_t c = 1; c < out.cols; ++c) mx = std::max(mx, out.at(r, c));
            double z = 0.0;
            for (std::size_t c = 0; c < out.cols; ++c) {
                double e = std::exp(out.at(r, c) - mx);
                out.at(r, c) = e;
                z += e;
            }
            for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) /= z;
        }
        return push(std::move(out), requires_grad(a), [a](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& y = t.val(self);
            Tensor& ga = t.acc(a);
            for (std::size_t r = 0; r < y.rows; ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < y.cols; ++c) dot += g.at(r, c) * y.at(r, c);
                for (std::size_t c = 0; c < y.cols; ++c)
                    ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
            }
        });
    }

    NodeId transpose(NodeId a) {
        const Tensor& A = val(a);
        Tensor out(A.cols, A.rows);
        for (std::size_t r = 0; r < A.rows; ++r)
            for (std::size_t c = 0; c < A.cols; ++c) out.at(c, r) = A.at(r, c);
        return push(std::move(out), requires_grad(a), [a](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Tensor& g = t.nodes_[self].grad;
            Tensor& ga = t.acc(a);
            for (std::size_t r = 0; r < g.rows; ++r)
                for (std::size_t c = 0; c < g.cols; ++c) ga.at(c, r) += g.at(r, c);
        });
    }

    // Same data, new shape.
    NodeId reshape(NodeId a, std::size_t r, std::size_t c) {
        const Tensor& A = val(a);
        if (r * c != A.size())
            throw shape_error("reshape " + A.shape_str() + " -> " + std::to_string(r) + "x" +
                              std::to_string(c));
        Tensor out = A;
        out.rows = r;
        out.cols = c;
        return push(std::move(out), requires_grad(a), [a](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Tensor& g = t.nodes_[self].grad;
            Tensor& ga = t.acc(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        });
    }

    // Vertical stack; all parts share a column count.
    NodeId concat_rows(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw shape_error("concat_rows: no parts");
        std::size_t cols = val(parts[0]).cols, rows = 0;
        bool rg = false;
        for (NodeId p : parts) {
            if (val(p).cols != cols)
                throw shape_error("concat_rows: column mismatch " + val(p).shape_str());
            rows += val(p).rows;
            rg = rg || requires_grad(p);
        }
        Tensor out(rows, cols);
        std::size_t r0 = 0;
        for (NodeId p : parts) {
            const Tensor& P = val(p);
            std::copy(P.data.begin(), P.data.end(), out.data.begin() + r0 * cols);
            r0 += P.rows;
        }
        return push(std::move(out), rg, [parts](Tape& t, NodeId self) {
            const Tensor& g = t.nodes_[self].grad;
            std::size_t r0 = 0;
            for (NodeId p : parts) {
                const Tensor& P = t.val(p);
                if (t.requires_grad(p)) {
                    Tensor& gp = t.acc(p);
                    for (std::size_t i = 0; i < P.size(); ++i)
                        gp.data[i] += g.data[r0 * g.cols + i];
                }
                r0 += P.rows;
            }
        });
    }

    // Horizontal stack; all parts share a row count.
    NodeId concat_cols(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw shape_error("concat_cols: no parts");
        std::size_t rows = val(parts[0]).rows, cols = 0;
        bool rg = false;
        for (NodeId p : parts) {
            if (val(p).rows != rows)
                throw shape_error("concat_cols: row mismatch " + val(p).shape_str());
            cols += val(p).cols;
            rg = rg || requires_grad(p);
        }
        Tensor out(rows, cols);
        std::size_t c0 = 0;
        for (NodeId p : parts) {
            const Tensor& P = val(p);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < P.cols; ++c) out.at(r, c0 + c) = P.at(r, c);
            c0 += P.cols;
        }
        return push(std::move(out), rg, [parts](Tape& t, NodeId self) {
            const Tensor& g = t.nodes_[self].grad;
            std::size_t c0 = 0;
            for (NodeId p : parts) {
                const Tensor& P = t.val(p);
                if (t.requires_grad(p)) {
                    Tensor& gp = t.acc(p);
                    for (std::size_t r = 0; r < P.rows; ++r)
                        for (std::size_t c = 0; c < P.cols; ++c)
                            gp.at(r, c) += g.at(r, c0 + c);
                }
                c0 += P.cols;
            }
        });
    }

    // Rows [r0, r1).
    NodeId slice_rows(NodeId a, std::size_t r0, std::size_t r1) {
        const Tensor& A = val(a);
        if (r0 >= r1 || r1 > A.rows)
            throw shape_error("slice_rows [" + std::to_string(r0) + "," + std::to_string(r1) +
                              ") of " + A.shape_str());
        Tensor out(r1 - r0, A.cols);
        std::copy(A.data.begin() + r0 * A.cols, A.data.begin() + r1 * A.cols, out.data.begin());
        return push(std::move(out), requires_grad(a), [a, r0](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Tensor& g = t.nodes_[self].grad;
            Tensor& ga = t.acc(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[r0 * g.cols + i] += g.data[i];
        });
    }

    // Row gather; duplicate indices accumulate on backward. Also the embedding lookup.
    NodeId gather_rows(NodeId a, std::vector<std::size_t> idx) {
        const Tensor& A = val(a);
        for (std::size_t i : idx)
            if (i >= A.rows)
                throw shape_error("gather_rows: index " + std::to_string(i) + " out of " +
                                  A.shape_str());
        Tensor out(idx.size(), A.cols);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < A.cols; ++c) out.at(r, c) = A.at(idx[r], c);
        return push(std::move(out), requires_grad(a),
                    [a, idx = std::move(idx)](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Tensor& g = t.nodes_[self].grad;
            Tensor& ga = t.acc(a);
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (std::size_t c = 0; c < g.cols; ++c) ga.at(idx[r], c) += g.at(r, c);
        });
    }

    NodeId embedding_lookup(NodeId table, const std::vector<std::size_t>& ids) {
        return gather_rows(table, ids);
    }

    NodeId sum(NodeId a) {
        double s = 0.0;
        for (double v : val(a).data) s += v;
        return push(Tensor::scalar(s), requires_grad(a), [a](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            double g = t.nodes_[self].grad.data[0];
            Tensor& ga = t.acc(a);
            for (double& v : ga.data) v += g;
        });
    }

    NodeId mean(NodeId a) { return scale(sum(a), 1.0 / static_cast<double>(val(a).size())); }

    // Inverted dropout: scales kept entries by 1/(1-p); identity when not training.
    NodeId dropout(NodeId a, double p, Rng& rng, bool training) {
        if (!training || p <= 0.0) return a;
        if (p >= 1.0) throw error("dropout rate must be < 1");
        const Tensor& A = val(a);
        Tensor out = A;
        auto mask = std::make_shared<std::vector<double>>(A.size());
        double keep = 1.0 - p;
        for (std::size_t i = 0; i < A.size(); ++i) {
            double m = rng.uniform() < keep ? 1.0 / keep : 0.0;
            (*mask)[i] = m;
            out.data[i] *= m;
        }
        return push(std::move(out), requires_grad(a), [a, mask](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Tensor& g = t.nodes_[self].grad;
            Tensor& ga = t.acc(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * (*mask)[i];
        });
    }

    // -log p[target] per row, reduced. `probs` rows must be probability vectors.
    NodeId cross_entropy(NodeId probs, std::vector<std::size_t> targets, Reduction red) {
        const Tensor& P = val(probs);
        if (targets.size() != P.rows)
            throw shape_error("cross_entropy: " + std::to_string(targets.size()) +
                              " targets for " + P.shape_str());
        for (std::size_t r = 0; r < P.rows; ++r)
            if (targets[r] >= P.cols)
                throw shape_error("cross_entropy: target class out of range");
        double loss = 0.0;
        for (std::size_t r = 0; r < P.rows; ++r)
            loss -= std::log(std::max(P.at(r, targets[r]), 1e-300));
        double coeff = red == Reduction::mean ? 1.0 / static_cast<double>(P.rows) : 1.0;
        return push(Tensor::scalar(loss * coeff), requires_grad(probs),
                    [probs, targets = std::move(targets), coeff](Tape& t, NodeId self) {
            if (!t.requires_grad(probs)) return;
            double g = t.nodes_[self].grad.data[0] * coeff;
            const Tensor& P = t.val(probs);
            Tensor& gp = t.acc(probs);
            for (std::size_t r = 0; r < P.rows; ++r)
                gp.at(r, targets[r]) -= g / std::max(P.at(r, targets[r]), 1e-300);
        });
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool grad_live = false;
        std::function<void(Tape&)> back;
    };

    std::vector<Node> nodes_;

    // Gradient accumulator, allocated on first touch.
    Tensor& acc(NodeId id) {
        Node& n = nodes_[id];
        if (!n.grad_live) {
            n.grad = Tensor(n.value.rows, n.value.cols);
            n.grad_live = true;
        }
        return n.grad;
    }

    template <class F>
    NodeId push(Tensor value, bool requires_grad, F&& back_with_self) {
        debug_check_finite(value, "tape op");
        NodeId id = static_cast<NodeId>(nodes_.size());
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad)
            n.back = [id, f = std::forward<F>(back_with_self)](Tape& t) { f(t, id); };
        nodes_.push_back(std::move(n));
        return id;
    }

    template <class DF>
    NodeId unary_from_output(NodeId a, Tensor out, DF df) {
        return push(std::move(out), requires_grad(a), [a, df](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Tensor& g = t.nodes_[self].grad;
            const Tensor& y = t.val(self);
            Tensor& ga = t.acc(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * df(y.data[i]);
        });
    }

    // out += A * B
    static void mm_acc(const Tensor& A, const Tensor& B, Tensor& out) {
        for (std::size_t i = 0; i < A.rows; ++i) {
            const double* arow = &A.data[i * A.cols];
            double* orow = &out.data[i * out.cols];
            for (std::size_t k = 0; k < A.cols; ++k) {
                double aik = arow[k];
                if (aik == 0.0) continue;
                const double* brow = &B.data[k * B.cols];
                for (std::size_t j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
            }
        }
    }

    // out += A * B^T
    static void mm_nt_acc(const Tensor& A, const Tensor& B, Tensor& out) {
        for (std::size_t i = 0; i < A.rows; ++i) {
            const double* arow = &A.data[i * A.cols];
            double* orow = &out.data[i * out.cols];
            for (std::size_t j = 0; j < B.rows; ++j) {
                const double* brow = &B.data[j * B.cols];
                double s = 0.0;
                for (std::size_t k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
                orow[j] += s;
            }
        }
    }

    // out += A^T * B
    static void mm_tn_acc(const Tensor& A, const Tensor& B, Tensor& out) {
        for (std::size_t k = 0; k < A.rows; ++k) {
            const double* arow = &A.data[k * A.cols];
            const double* brow = &B.data[k * B.cols];
            for (std::size_t i = 0; i < A.cols; ++i) {
                double aki = arow[i];
                if (aki == 0.0) continue;
                double* orow = &out.data[i * out.cols];
                for (std::size_t j = 0; j < B.cols; ++j) orow[j] += aki * brow[j];
            }
        }
    }
};

}  // namespace ncce
