#pragma once

// Minimal reverse-mode tape over row-major Eigen matrices. Every node keeps
// its value; gradients of parameter leaves accumulate straight into the
// Parameter, so a tensor reachable through two roles receives the sum of
// both contributions.

#include "dialsum/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dialsum::nn {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
struct Parameter {
    std::string name;
    Matrix<Real> value;
    Matrix<Real> grad;

    Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix<Real>::Zero(rows, cols)), grad(Matrix<Real>::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
    Eigen::Index size() const { return value.size(); }
};

template <typename Real>
using ParamPtr = std::shared_ptr<Parameter<Real>>;

struct Var {
    int index = -1;
};

template <typename Real>
class Graph {
public:
    using Mat = Matrix<Real>;

    Var param(Parameter<Real> &p) {
        if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
        Node n;
        n.param = &p;
        n.requires_grad = true;
        int idx = push(std::move(n));
        param_nodes_.emplace(&p, idx);
        return Var{idx};
    }

    Var constant(Mat m) {
        Node n;
        n.value = std::move(m);
        return Var{push(std::move(n))};
    }

    const Mat &value(Var v) const {
        const Node &n = nodes_.at(static_cast<std::size_t>(v.index));
        return n.param ? n.param->value : n.value;
    }

    Real scalar(Var v) const { return value(v)(0, 0); }
    Eigen::Index rows(Var v) const { return value(v).rows(); }
    Eigen::Index cols(Var v) const { return value(v).cols(); }

    Var matmul(Var a, Var b) {
        Mat out = value(a) * value(b);
        return op(std::move(out), {a, b}, [a, b](Graph &g, const Mat &go) {
            if (g.needs(a)) g.grad(a).noalias() += go * g.value(b).transpose();
            if (g.needs(b)) g.grad(b).noalias() += g.value(a).transpose() * go;
        });
    }

    /// a * b^T
    Var matmul_nt(Var a, Var b) {
        Mat out = value(a) * value(b).transpose();
        return op(std::move(out), {a, b}, [a, b](Graph &g, const Mat &go) {
            if (g.needs(a)) g.grad(a).noalias() += go * g.value(b);
            if (g.needs(b)) g.grad(b).noalias() += go.transpose() * g.value(a);
        });
    }

    Var add(Var a, Var b) {
        Mat out = value(a) + value(b);
        return op(std::move(out), {a, b}, [a, b](Graph &g, const Mat &go) {
            if (g.needs(a)) g.grad(a) += go;
            if (g.needs(b)) g.grad(b) += go;
        });
    }

    /// Adds the 1 x c row `bias` to every row of `x`.
    Var add_row(Var x, Var bias) {
        Mat out = value(x).rowwise() + value(bias).row(0);
        return op(std::move(out), {x, bias}, [x, bias](Graph &g, const Mat &go) {
            if (g.needs(x)) g.grad(x) += go;
            if (g.needs(bias)) g.grad(bias) += go.colwise().sum();
        });
    }

    Var scale(Var x, Real s) {
        Mat out = value(x) * s;
        return op(std::move(out), {x}, [x, s](Graph &g, const Mat &go) {
            if (g.needs(x)) g.grad(x) += go * s;
        });
    }

    /// tanh approximation of GELU.
    Var gelu(Var x) {
        const Mat &xv = value(x);
        const Real c = static_cast<Real>(0.7978845608028654);
        const Real k = static_cast<Real>(0.044715);
        Mat out = xv.unaryExpr([c, k](Real v) { return Real(0.5) * v * (Real(1) + std::tanh(c * (v + k * v * v * v))); });
        return op(std::move(out), {x}, [x, c, k](Graph &g, const Mat &go) {
            if (!g.needs(x)) return;
            Mat d = g.value(x).unaryExpr([c, k](Real v) {
                Real t = std::tanh(c * (v + k * v * v * v));
                return Real(0.5) * (Real(1) + t) + Real(0.5) * v * (Real(1) - t * t) * c * (Real(1) + Real(3) * k * v * v);
            });
            g.grad(x) += go.cwiseProduct(d);
        });
    }

    Var layer_norm(Var x, Var gamma, Var beta, Real eps = Real(1e-5)) {
        const Mat &xv = value(x);
        const auto n = xv.cols();
        Mat xhat(xv.rows(), n);
        Eigen::Matrix<Real, Eigen::Dynamic, 1> rstd(xv.rows());
        for (Eigen::Index r = 0; r < xv.rows(); ++r) {
            Real mean = xv.row(r).mean();
            Real var = (xv.row(r).array() - mean).square().mean();
            rstd(r) = Real(1) / std::sqrt(var + eps);
            xhat.row(r) = (xv.row(r).array() - mean) * rstd(r);
        }
        Mat out = (xhat.array().rowwise() * value(gamma).row(0).array()).rowwise() + value(beta).row(0).array();
        return op(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), rstd = std::move(rstd)](Graph &g, const Mat &go) {
                      if (g.needs(gamma)) g.grad(gamma) += go.cwiseProduct(xhat).colwise().sum();
                      if (g.needs(beta)) g.grad(beta) += go.colwise().sum();
                      if (!g.needs(x)) return;
                      Mat dxhat = go.array().rowwise() * g.value(gamma).row(0).array();
                      auto &gx = g.grad(x);
                      const Real inv_n = Real(1) / static_cast<Real>(xhat.cols());
                      for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                          Real m1 = dxhat.row(r).sum() * inv_n;
                          Real m2 = dxhat.row(r).dot(xhat.row(r)) * inv_n;
                          gx.row(r).array() += rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                      }
                  });
    }

    /// Row softmax over allowed entries: key j is allowed for query i when
    /// key_keep[j] != 0 (or key_keep is empty) and, if causal, j <= i.
    /// Disallowed entries are exactly zero.
    Var softmax_rows(Var x, std::span<const std::uint8_t> key_keep, bool causal) {
        const Mat &xv = value(x);
        Mat out = Mat::Zero(xv.rows(), xv.cols());
        for (Eigen::Index i = 0; i < xv.rows(); ++i) {
            auto allowed = [&](Eigen::Index j) {
                if (causal && j > i) return false;
                return key_keep.empty() || key_keep[static_cast<std::size_t>(j)] != 0;
            };
            Real mx = -std::numeric_limits<Real>::infinity();
            for (Eigen::Index j = 0; j < xv.cols(); ++j) {
                if (allowed(j)) mx = std::max(mx, xv(i, j));
            }
            if (!std::isfinite(mx)) continue;
            Real sum = 0;
            for (Eigen::Index j = 0; j < xv.cols(); ++j) {
                if (allowed(j)) {
                    out(i, j) = std::exp(xv(i, j) - mx);
                    sum += out(i, j);
                }
            }
            out.row(i) /= sum;
        }
        int self = static_cast<int>(nodes_.size());
        return op(std::move(out), {x}, [x, self](Graph &g, const Mat &go) {
            if (!g.needs(x)) return;
            const Mat &y = g.value(Var{self});
            Eigen::Matrix<Real, Eigen::Dynamic, 1> dots = go.cwiseProduct(y).rowwise().sum();
            g.grad(x) += y.cwiseProduct(go.colwise() - dots);
        });
    }

    Var slice_cols(Var x, Eigen::Index start, Eigen::Index count) {
        Mat out = value(x).middleCols(start, count);
        return op(std::move(out), {x}, [x, start, count](Graph &g, const Mat &go) {
            if (g.needs(x)) g.grad(x).middleCols(start, count) += go;
        });
    }

    Var concat_cols(const std::vector<Var> &parts) {
        Eigen::Index rows = value(parts.front()).rows();
        Eigen::Index cols = 0;
        for (Var p : parts) cols += value(p).cols();
        Mat out(rows, cols);
        Eigen::Index at = 0;
        for (Var p : parts) {
            out.middleCols(at, value(p).cols()) = value(p);
            at += value(p).cols();
        }
        return op(std::move(out), parts, [parts](Graph &g, const Mat &go) {
            Eigen::Index off = 0;
            for (Var p : parts) {
                auto c = g.value(p).cols();
                if (g.needs(p)) g.grad(p) += go.middleCols(off, c);
                off += c;
            }
        });
    }

    /// Inverted dropout: kept entries are scaled by 1/(1-p).
    Var dropout(Var x, Real p, RngStream &rng) {
        if (p <= Real(0)) return x;
        const Mat &xv = value(x);
        const Real keep_scale = Real(1) / (Real(1) - p);
        Mat mask(xv.rows(), xv.cols());
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
            mask.data()[i] = rng.uniform01() < static_cast<double>(p) ? Real(0) : keep_scale;
        }
        Mat out = xv.cwiseProduct(mask);
        return op(std::move(out), {x}, [x, mask = std::move(mask)](Graph &g, const Mat &go) {
            if (g.needs(x)) g.grad(x) += go.cwiseProduct(mask);
        });
    }

    /// Rows of `table` selected by `ids`.
    Var embedding(Var table, std::span<const std::int32_t> ids) {
        const Mat &tv = value(table);
        Mat out(static_cast<Eigen::Index>(ids.size()), tv.cols());
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (ids[r] < 0 || ids[r] >= tv.rows()) throw std::out_of_range("embedding id out of range");
            out.row(static_cast<Eigen::Index>(r)) = tv.row(ids[r]);
        }
        std::vector<std::int32_t> rows(ids.begin(), ids.end());
        return op(std::move(out), {table}, [table, rows = std::move(rows)](Graph &g, const Mat &go) {
            if (!g.needs(table)) return;
            auto &gt = g.grad(table);
            for (std::size_t r = 0; r < rows.size(); ++r) gt.row(rows[r]) += go.row(static_cast<Eigen::Index>(r));
        });
    }

    Var gather_rows(Var x, std::span<const int> positions) {
        const Mat &xv = value(x);
        Mat out(static_cast<Eigen::Index>(positions.size()), xv.cols());
        for (std::size_t r = 0; r < positions.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = xv.row(positions[r]);
        std::vector<int> pos(positions.begin(), positions.end());
        return op(std::move(out), {x}, [x, pos = std::move(pos)](Graph &g, const Mat &go) {
            if (!g.needs(x)) return;
            auto &gx = g.grad(x);
            for (std::size_t r = 0; r < pos.size(); ++r) gx.row(pos[r]) += go.row(static_cast<Eigen::Index>(r));
        });
    }

    /// Sum over rows of -log softmax(logits)[target]; a 1 x 1 node.
    Var cross_entropy_sum(Var logits, std::span<const int> targets) {
        const Mat &lv = value(logits);
        Mat probs(lv.rows(), lv.cols());
        Real total = 0;
        for (Eigen::Index r = 0; r < lv.rows(); ++r) {
            Real mx = lv.row(r).maxCoeff();
            auto e = (lv.row(r).array() - mx).exp();
            Real z = e.sum();
            probs.row(r) = e / z;
            total += -(lv(r, targets[static_cast<std::size_t>(r)]) - mx - std::log(z));
        }
        Mat out(1, 1);
        out(0, 0) = total;
        std::vector<int> tg(targets.begin(), targets.end());
        return op(std::move(out), {logits}, [logits, probs = std::move(probs), tg = std::move(tg)](Graph &g, const Mat &go) {
            if (!g.needs(logits)) return;
            Mat d = probs;
            for (std::size_t r = 0; r < tg.size(); ++r) d(static_cast<Eigen::Index>(r), tg[r]) -= Real(1);
            g.grad(logits) += d * go(0, 0);
        });
    }

    /// Sum of all entries; a 1 x 1 node.
    Var sum(Var x) {
        Mat out(1, 1);
        out(0, 0) = value(x).sum();
        return op(std::move(out), {x}, [x](Graph &g, const Mat &go) {
            if (g.needs(x)) g.grad(x).array() += go(0, 0);
        });
    }

    void backward(Var loss) {
        auto &root = nodes_.at(static_cast<std::size_t>(loss.index));
        if (!root.requires_grad) return;
        grad(loss).array() += Real(1);
        for (int i = loss.index; i >= 0; --i) {
            Node &n = nodes_[static_cast<std::size_t>(i)];
            if (!n.backward || n.grad.size() == 0) continue;
            n.backward(*this, n.grad);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        Parameter<Real> *param = nullptr;
        bool requires_grad = false;
        std::function<void(Graph &, const Mat &)> backward;
    };

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size() - 1);
    }

    bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.index)].requires_grad; }

    Mat &grad(Var v) {
        Node &n = nodes_[static_cast<std::size_t>(v.index)];
        if (n.param) return n.param->grad;
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    template <typename Backward>
    Var op(Mat out, std::initializer_list<Var> inputs, Backward &&bw) {
        return op(std::move(out), std::vector<Var>(inputs), std::forward<Backward>(bw));
    }

    template <typename Backward>
    Var op(Mat out, const std::vector<Var> &inputs, Backward &&bw) {
        Node n;
        n.value = std::move(out);
        for (Var v : inputs) n.requires_grad = n.requires_grad || needs(v);
        if (n.requires_grad) n.backward = std::forward<Backward>(bw);
        return Var{push(std::move(n))};
    }

    std::vector<Node> nodes_;
    std::unordered_map<Parameter<Real> *, int> param_nodes_;
};

} // namespace dialsum::nn
