// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "medrg/autograd.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "medrg/errors.hpp"

namespace medrg {

namespace {

void require(bool ok, const char *op, const std::string &what) {
    if (!ok) {
        throw InvalidArgument(std::string(op) + ": " + what);
    }
}

std::string shape(const Matrix &m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

constexpr float kGeluC = 0.7978845608028654f; // sqrt(2 / pi)

/// out(i, :) = sum_k a(i, k) b(k, :), accumulated in k order for every element.
/// Unlike a blocked GEMM, row i of the result depends only on row i of `a`, so
/// causal outputs stay bit-identical when rows are appended.
template <typename A, typename B>
Matrix row_product(const A &a, const B &b, Eigen::Index k_count) {
    const Eigen::Index m = a.rows();
    const Eigen::Index n = b.cols();
    Matrix out = Matrix::Zero(m, n);
    Eigen::Index i = 0;
    // Four rows share each pass over b; every element still sums in k order.
    for (; i + 4 <= m; i += 4) {
        float *o0 = out.row(i).data();
        float *o1 = out.row(i + 1).data();
        float *o2 = out.row(i + 2).data();
        float *o3 = out.row(i + 3).data();
        for (Eigen::Index k = 0; k < k_count; ++k) {
            const float a0 = a(i, k), a1 = a(i + 1, k), a2 = a(i + 2, k), a3 = a(i + 3, k);
            const float *br = &b.coeffRef(k, 0);
            for (Eigen::Index c = 0; c < n; ++c) {
                const float v = br[c];
                o0[c] += a0 * v;
                o1[c] += a1 * v;
                o2[c] += a2 * v;
                o3[c] += a3 * v;
            }
        }
    }
    for (; i < m; ++i) {
        float *o = out.row(i).data();
        for (Eigen::Index k = 0; k < k_count; ++k) {
            const float aik = a(i, k);
            const float *br = &b.coeffRef(k, 0);
            for (Eigen::Index c = 0; c < n; ++c) {
                o[c] += aik * br[c];
            }
        }
    }
    return out;
}

} // namespace

Var Graph::push(Matrix value, bool needs_grad, std::function<void()> back) {
    Node n;
    n.own = std::move(value);
    n.needs_grad = needs_grad && grad_enabled_;
    if (n.needs_grad) {
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::input(Matrix value) { return push(std::move(value), false); }

Var Graph::param(const Parameter &p) {
    Node n;
    n.param = &p;
    n.needs_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix &Graph::value(Var v) const {
    const Node &n = nodes_[v.id];
    return n.param ? n.param->value : n.own;
}

Matrix Graph::grad(Var v) const {
    const Node &n = nodes_[v.id];
    if (n.grad.size() == 0) {
        const Matrix &val = value(v);
        return Matrix::Zero(val.rows(), val.cols());
    }
    return n.grad;
}

Matrix &Graph::grad_ref(Var v) {
    Node &n = nodes_[v.id];
    if (n.grad.size() == 0) {
        const Matrix &val = value(v);
        n.grad = Matrix::Zero(val.rows(), val.cols());
    }
    return n.grad;
}

bool Graph::any_needs(std::initializer_list<Var> vs) const {
    if (!grad_enabled_) {
        return false;
    }
    for (Var v : vs) {
        if (needs(v)) {
            return true;
        }
    }
    return false;
}

Var Graph::matmul(Var a, Var b) {
    const Matrix &A = value(a);
    const Matrix &B = value(b);
    require(A.cols() == B.rows(), "matmul", shape(A) + " * " + shape(B));
    Matrix out = row_product(A, B, A.cols());
    const bool ng = any_needs({a, b});
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), ng, [this, a, b, o] {
        const Matrix &G = grad_of(o);
        if (needs(a)) {
            grad_ref(a).noalias() += G * value(b).transpose();
        }
        if (needs(b)) {
            grad_ref(b).noalias() += value(a).transpose() * G;
        }
    });
}

Var Graph::matmul_bt(Var a, Var b) {
    const Matrix &A = value(a);
    const Matrix &B = value(b);
    require(A.cols() == B.cols(), "matmul_bt", shape(A) + " * " + shape(B) + "^T");
    const Matrix Bt = B.transpose();
    Matrix out = row_product(A, Bt, A.cols());
    const bool ng = any_needs({a, b});
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), ng, [this, a, b, o] {
        const Matrix &G = grad_of(o);
        if (needs(a)) {
            grad_ref(a).noalias() += G * value(b);
        }
        if (needs(b)) {
            grad_ref(b).noalias() += G.transpose() * value(a);
        }
    });
}

Var Graph::add(Var a, Var b) {
    const Matrix &A = value(a);
    const Matrix &B = value(b);
    require(A.rows() == B.rows() && A.cols() == B.cols(), "add", shape(A) + " + " + shape(B));
    Matrix out = A + B;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({a, b}), [this, a, b, o] {
        const Matrix &G = grad_of(o);
        if (needs(a)) {
            grad_ref(a) += G;
        }
        if (needs(b)) {
            grad_ref(b) += G;
        }
    });
}

Var Graph::add_bias(Var a, Var bias) {
    const Matrix &A = value(a);
    const Matrix &B = value(bias);
    require(B.rows() == 1 && B.cols() == A.cols(), "add_bias", shape(A) + " + " + shape(B));
    Matrix out = A.rowwise() + B.row(0);
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({a, bias}), [this, a, bias, o] {
        const Matrix &G = grad_of(o);
        if (needs(a)) {
            grad_ref(a) += G;
        }
        if (needs(bias)) {
            grad_ref(bias) += G.colwise().sum();
        }
    });
}

Var Graph::scale(Var a, float s) {
    Matrix out = value(a) * s;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({a}), [this, a, s, o] { grad_ref(a) += grad_of(o) * s; });
}

Var Graph::gelu(Var a) {
    const Matrix &X = value(a);
    Matrix out(X.rows(), X.cols());
    auto tanh_part = std::make_shared<Matrix>(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.size(); ++i) {
        const float x = X.data()[i];
        const float t = std::tanh(kGeluC * (x + 0.044715f * x * x * x));
        tanh_part->data()[i] = t;
        out.data()[i] = 0.5f * x * (1.0f + t);
    }
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({a}), [this, a, o, tanh_part] {
        const Matrix &X = value(a);
        const Matrix &G = grad_of(o);
        Matrix &dX = grad_ref(a);
        for (Eigen::Index i = 0; i < X.size(); ++i) {
            const float x = X.data()[i];
            const float t = tanh_part->data()[i];
            const float d = 0.5f * (1.0f + t) +
                            0.5f * x * (1.0f - t * t) * kGeluC * (1.0f + 3.0f * 0.044715f * x * x);
            dX.data()[i] += G.data()[i] * d;
        }
    });
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, float eps) {
    const Matrix &X = value(x);
    const Matrix &g = value(gamma);
    const Matrix &b = value(beta);
    require(g.rows() == 1 && g.cols() == X.cols() && b.rows() == 1 && b.cols() == X.cols(),
            "layer_norm", shape(X) + " with gamma " + shape(g));
    const Eigen::Index n = X.rows();
    const auto d = static_cast<float>(X.cols());
    auto xhat = std::make_shared<Matrix>(X.rows(), X.cols());
    auto rstd = std::make_shared<Eigen::VectorXf>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const float mean = X.row(i).sum() / d;
        const auto centered = (X.row(i).array() - mean).matrix();
        const float var = centered.squaredNorm() / d;
        const float r = 1.0f / std::sqrt(var + eps);
        (*rstd)(i) = r;
        xhat->row(i) = centered * r;
    }
    Matrix out = (xhat->array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({x, gamma, beta}), [this, x, gamma, beta, o, xhat, rstd] {
        const Matrix &G = grad_of(o);
        if (needs(gamma)) {
            grad_ref(gamma) += (G.array() * xhat->array()).colwise().sum().matrix();
        }
        if (needs(beta)) {
            grad_ref(beta) += G.colwise().sum();
        }
        if (needs(x)) {
            const Matrix &g = value(gamma);
            Matrix &dX = grad_ref(x);
            const auto d = static_cast<float>(G.cols());
            for (Eigen::Index i = 0; i < G.rows(); ++i) {
                const Eigen::RowVectorXf dxhat = G.row(i).cwiseProduct(g.row(0));
                const float m1 = dxhat.sum() / d;
                const float m2 = dxhat.dot(xhat->row(i)) / d;
                dX.row(i) += (*rstd)(i) *
                             (dxhat.array() - m1 - xhat->row(i).array() * m2).matrix();
            }
        }
    });
}

Var Graph::attention(Var q, Var k, Var v, int heads, bool causal) {
    const Matrix &Q = value(q);
    const Matrix &K = value(k);
    const Matrix &V = value(v);
    require(heads > 0 && Q.cols() % heads == 0, "attention", "width not divisible by heads");
    require(K.cols() == Q.cols() && V.cols() == Q.cols() && K.rows() == V.rows(), "attention",
            "q " + shape(Q) + ", k " + shape(K) + ", v " + shape(V));
    require(!causal || Q.rows() == K.rows(), "attention", "causal attention needs n == m");

    const Eigen::Index n = Q.rows();
    const Eigen::Index m = K.rows();
    const Eigen::Index dh = Q.cols() / heads;
    const float scl = 1.0f / std::sqrt(static_cast<float>(dh));

    auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(heads));
    Matrix out(n, Q.cols());
    for (int h = 0; h < heads; ++h) {
        const Matrix Kt = K.middleCols(h * dh, dh).transpose();
        Matrix S = row_product(Q.middleCols(h * dh, dh), Kt, dh) * scl;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index valid = causal ? i + 1 : m;
            const float mx = S.row(i).head(valid).maxCoeff();
            float sum = 0.0f;
            for (Eigen::Index j = 0; j < valid; ++j) {
                const float e = std::exp(S(i, j) - mx);
                S(i, j) = e;
                sum += e;
            }
            S.row(i).head(valid) /= sum;
            if (valid < m) {
                S.row(i).tail(m - valid).setZero();
            }
        }
        const Matrix Vh = V.middleCols(h * dh, dh);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index valid = causal ? i + 1 : m;
            out.middleCols(h * dh, dh).row(i) = row_product(S.row(i), Vh, valid);
        }
        (*probs)[static_cast<std::size_t>(h)] = std::move(S);
    }

    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({q, k, v}), [this, q, k, v, o, probs, heads, dh, scl] {
        const Matrix &G = grad_of(o);
        const Matrix &Q = value(q);
        const Matrix &K = value(k);
        const Matrix &V = value(v);
        for (int h = 0; h < heads; ++h) {
            const Matrix &P = (*probs)[static_cast<std::size_t>(h)];
            const auto Gh = G.middleCols(h * dh, dh);
            if (needs(v)) {
                grad_ref(v).middleCols(h * dh, dh).noalias() += P.transpose() * Gh;
            }
            if (needs(q) || needs(k)) {
                Matrix dP = Gh * V.middleCols(h * dh, dh).transpose();
                const Eigen::VectorXf row_dot = (dP.array() * P.array()).rowwise().sum();
                Matrix dS = (P.array() * (dP.array().colwise() - row_dot.array())).matrix() * scl;
                if (needs(q)) {
                    grad_ref(q).middleCols(h * dh, dh).noalias() += dS * K.middleCols(h * dh, dh);
                }
                if (needs(k)) {
                    grad_ref(k).middleCols(h * dh, dh).noalias() +=
                        dS.transpose() * Q.middleCols(h * dh, dh);
                }
            }
        }
    });
}

Var Graph::slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
    const Matrix &A = value(a);
    require(begin >= 0 && count >= 0 && begin + count <= A.rows(), "slice_rows",
            "rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") of " + shape(A));
    Matrix out = A.middleRows(begin, count);
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({a}), [this, a, begin, count, o] {
        grad_ref(a).middleRows(begin, count) += grad_of(o);
    });
}

Var Graph::concat_rows(std::span<const Var> parts) {
    require(!parts.empty(), "concat_rows", "no inputs");
    const Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    bool ng = false;
    for (Var p : parts) {
        require(value(p).cols() == cols, "concat_rows", "column mismatch");
        rows += value(p).rows();
        ng = ng || any_needs({p});
    }
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (Var p : parts) {
        out.middleRows(r, value(p).rows()) = value(p);
        r += value(p).rows();
    }
    std::vector<Var> ins(parts.begin(), parts.end());
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), ng, [this, ins = std::move(ins), o] {
        const Matrix &G = grad_of(o);
        Eigen::Index r = 0;
        for (Var p : ins) {
            const Eigen::Index n = value(p).rows();
            if (needs(p)) {
                grad_ref(p) += G.middleRows(r, n);
            }
            r += n;
        }
    });
}

Var Graph::gather_rows(Var table, std::span<const int> ids) {
    const Matrix &T = value(table);
    Matrix out(static_cast<Eigen::Index>(ids.size()), T.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && ids[i] < T.rows(), "gather_rows", "id out of range: " + std::to_string(ids[i]));
        out.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
    }
    std::vector<int> idx(ids.begin(), ids.end());
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({table}), [this, table, idx = std::move(idx), o] {
        const Matrix &G = grad_of(o);
        Matrix &dT = grad_ref(table);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            dT.row(idx[i]) += G.row(static_cast<Eigen::Index>(i));
        }
    });
}

Var Graph::cross_entropy(Var logits, std::span<const int> targets, std::span<const float> mask) {
    const Matrix &Z = value(logits);
    require(static_cast<Eigen::Index>(targets.size()) == Z.rows() &&
                static_cast<Eigen::Index>(mask.size()) == Z.rows(),
            "cross_entropy", "targets/mask length must equal logits rows");
    double weight = 0.0;
    for (float w : mask) {
        weight += w;
    }
    require(weight > 0.0, "cross_entropy", "all-zero loss mask");

    auto probs = std::make_shared<Matrix>(Z.rows(), Z.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        if (mask[static_cast<std::size_t>(i)] == 0.0f) {
            continue;
        }
        const int t = targets[static_cast<std::size_t>(i)];
        require(t >= 0 && t < Z.cols(), "cross_entropy", "target id out of range");
        const float mx = Z.row(i).maxCoeff();
        const Eigen::RowVectorXf e = (Z.row(i).array() - mx).exp().matrix();
        const double sum = e.cast<double>().sum();
        probs->row(i) = e / static_cast<float>(sum);
        loss += mask[static_cast<std::size_t>(i)] * (std::log(sum) + mx - Z(i, t));
    }
    Matrix out(1, 1);
    out(0, 0) = static_cast<float>(loss / weight);

    std::vector<int> tg(targets.begin(), targets.end());
    std::vector<float> mk(mask.begin(), mask.end());
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({logits}),
                [this, logits, o, probs, tg = std::move(tg), mk = std::move(mk), weight] {
                    const float g = grad_of(o)(0, 0) / static_cast<float>(weight);
                    Matrix &dZ = grad_ref(logits);
                    for (Eigen::Index i = 0; i < dZ.rows(); ++i) {
                        const float w = mk[static_cast<std::size_t>(i)];
                        if (w == 0.0f) {
                            continue;
                        }
                        dZ.row(i) += (g * w) * probs->row(i);
                        dZ(i, tg[static_cast<std::size_t>(i)]) -= g * w;
                    }
                });
}

Var Graph::box_regression_loss(Var raw, const BoundingBox &target, double lambda_l1,
                               double lambda_giou, BoxLossTerms *terms) {
    const Matrix &R = value(raw);
    require(R.rows() == 1 && R.cols() == 4, "box_regression_loss", "raw must be 1x4, got " + shape(R));
    const Vec4 r{R(0, 0), R(0, 1), R(0, 2), R(0, 3)};
    const BoxParameterization param = parameterize_box(r);
    const BoxLossValue bl = box_loss(param.box, target);
    if (terms) {
        terms->l1 = bl.l1_term;
        terms->giou = bl.giou_term;
        terms->box = param.box;
    }
    Vec4 d_raw{};
    for (std::size_t i = 0; i < 4; ++i) {
        const double d_box = lambda_l1 * bl.l1_gradient[i] + lambda_giou * bl.giou_gradient[i];
        for (std::size_t j = 0; j < 4; ++j) {
            d_raw[j] += d_box * param.jacobian[i][j];
        }
    }
    Matrix out(1, 1);
    out(0, 0) = static_cast<float>(lambda_l1 * bl.l1_term + lambda_giou * bl.giou_term);
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), any_needs({raw}), [this, raw, o, d_raw] {
        const float g = grad_of(o)(0, 0);
        Matrix &dR = grad_ref(raw);
        for (Eigen::Index j = 0; j < 4; ++j) {
            dR(0, j) += g * static_cast<float>(d_raw[static_cast<std::size_t>(j)]);
        }
    });
}

Var Graph::weighted_sum(std::span<const Var> scalars, std::span<const float> weights) {
    require(scalars.size() == weights.size() && !scalars.empty(), "weighted_sum", "size mismatch");
    Matrix out = Matrix::Zero(1, 1);
    bool ng = false;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        require(value(scalars[i]).size() == 1, "weighted_sum", "inputs must be 1x1");
        out(0, 0) += weights[i] * value(scalars[i])(0, 0);
        ng = ng || any_needs({scalars[i]});
    }
    std::vector<Var> ins(scalars.begin(), scalars.end());
    std::vector<float> ws(weights.begin(), weights.end());
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(std::move(out), ng, [this, ins = std::move(ins), ws = std::move(ws), o] {
        const float g = grad_of(o)(0, 0);
        for (std::size_t i = 0; i < ins.size(); ++i) {
            if (needs(ins[i])) {
                grad_ref(ins[i])(0, 0) += g * ws[i];
            }
        }
    });
}

void Graph::backward(Var loss) {
    require(value(loss).size() == 1, "backward", "loss must be 1x1");
    if (!needs(loss)) {
        return;
    }
    grad_ref(loss)(0, 0) += 1.0f;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node &n = nodes_[i];
        if (n.back && n.grad.size() != 0) {
            n.back();
        }
    }
}

void Graph::flush_parameter_grads(Gradients &grads, float scale) const {
    for (const Node &n : nodes_) {
        if (n.param && n.grad.size() != 0) {
            grads.at(*n.param) += scale * n.grad;
        }
    }
}

} // namespace medrg
