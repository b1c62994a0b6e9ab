#include "v2t/tape.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

namespace v2t {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Mat::zeros_like(n.val);
    return n.grad;
}

int Tape::input(Mat value) {
    Node n;
    n.op = Op::input;
    n.val = std::move(value);
    n.needs_grad = false;
    return push(n);
}

int Tape::param(int param_index) {
    Node n;
    n.op = Op::param;
    n.param = param_index;
    n.val = params_->value(param_index);
    n.needs_grad = true;
    return push(n);
}

int Tape::embed(int table_param, std::span<const TokenId> ids) {
    const Mat& table = params_->value(table_param);
    Node n;
    n.op = Op::embed;
    n.param = table_param;
    n.ids.assign(ids.begin(), ids.end());
    n.val = Mat(static_cast<int>(ids.size()), table.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        assert(ids[i] >= 0 && ids[i] < table.rows);
        for (int c = 0; c < table.cols; ++c) {
            n.val(static_cast<int>(i), c) = table(ids[i], c);
        }
    }
    n.needs_grad = true;
    return push(n);
}

int Tape::matmul(int a, int b) {
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.val = Mat(value(a).rows, value(b).cols);
    gemm_nn(value(a), value(b), n.val, false);
    n.needs_grad = node_needs_grad(a) || node_needs_grad(b);
    return push(n);
}

int Tape::matmul_nt(int a, int b) {
    Node n;
    n.op = Op::matmul_nt;
    n.a = a;
    n.b = b;
    n.val = Mat(value(a).rows, value(b).rows);
    gemm_nt(value(a), value(b), n.val, false);
    n.needs_grad = node_needs_grad(a) || node_needs_grad(b);
    return push(n);
}

int Tape::add(int a, int b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    assert(va.same_shape(vb));
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.val = va;
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val.d[i] += vb.d[i];
    n.needs_grad = node_needs_grad(a) || node_needs_grad(b);
    return push(n);
}

int Tape::add_rowvec(int a, int rowvec) {
    const Mat& va = value(a);
    const Mat& vr = value(rowvec);
    assert(vr.rows == 1 && vr.cols == va.cols);
    Node n;
    n.op = Op::add_rowvec;
    n.a = a;
    n.b = rowvec;
    n.val = va;
    for (int r = 0; r < va.rows; ++r) {
        for (int c = 0; c < va.cols; ++c) n.val(r, c) += vr(0, c);
    }
    n.needs_grad = node_needs_grad(a) || node_needs_grad(rowvec);
    return push(n);
}

int Tape::add_const(int a, const Mat& c) {
    const Mat& va = value(a);
    assert(va.same_shape(c));
    Node n;
    n.op = Op::add_const;
    n.a = a;
    n.val = va;
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val.d[i] += c.d[i];
    n.needs_grad = node_needs_grad(a);
    return push(n);
}

int Tape::scale(int a, double s) {
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.s = s;
    n.val = value(a);
    for (auto& x : n.val.d) x *= s;
    n.needs_grad = node_needs_grad(a);
    return push(n);
}

int Tape::gelu(int a) {
    Node n;
    n.op = Op::gelu;
    n.a = a;
    n.val = value(a);
    for (auto& x : n.val.d) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    n.needs_grad = node_needs_grad(a);
    return push(n);
}

int Tape::softmax_rows(int a) {
    const Mat& va = value(a);
    Node n;
    n.op = Op::softmax_rows;
    n.a = a;
    n.val = Mat(va.rows, va.cols);
    for (int r = 0; r < va.rows; ++r) {
        double m = va(r, 0);
        for (int c = 1; c < va.cols; ++c) m = std::max(m, va(r, c));
        double sum = 0.0;
        for (int c = 0; c < va.cols; ++c) {
            double e = std::exp(va(r, c) - m);
            n.val(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < va.cols; ++c) n.val(r, c) /= sum;
    }
    n.needs_grad = node_needs_grad(a);
    return push(n);
}

int Tape::layernorm(int a, int gain, int bias, double eps) {
    const Mat& va = value(a);
    const Mat& vg = value(gain);
    const Mat& vb = value(bias);
    assert(vg.rows == 1 && vg.cols == va.cols && vb.rows == 1 && vb.cols == va.cols);
    Node n;
    n.op = Op::layernorm;
    n.a = a;
    n.b = gain;
    n.c = bias;
    n.val = Mat(va.rows, va.cols);
    n.aux = Mat(va.rows, va.cols + 1);  // normalized values plus inv_std per row
    for (int r = 0; r < va.rows; ++r) {
        double mean = 0.0;
        for (int c = 0; c < va.cols; ++c) mean += va(r, c);
        mean /= va.cols;
        double var = 0.0;
        for (int c = 0; c < va.cols; ++c) {
            double dlt = va(r, c) - mean;
            var += dlt * dlt;
        }
        var /= va.cols;
        double inv_std = 1.0 / std::sqrt(var + eps);
        n.aux(r, va.cols) = inv_std;
        for (int c = 0; c < va.cols; ++c) {
            double xhat = (va(r, c) - mean) * inv_std;
            n.aux(r, c) = xhat;
            n.val(r, c) = xhat * vg(0, c) + vb(0, c);
        }
    }
    n.needs_grad = node_needs_grad(a) || node_needs_grad(gain) || node_needs_grad(bias);
    return push(n);
}

int Tape::slice_cols(int a, int c0, int c1) {
    const Mat& va = value(a);
    assert(0 <= c0 && c0 < c1 && c1 <= va.cols);
    Node n;
    n.op = Op::slice_cols;
    n.a = a;
    n.i0 = c0;
    n.i1 = c1;
    n.val = Mat(va.rows, c1 - c0);
    for (int r = 0; r < va.rows; ++r) {
        for (int c = c0; c < c1; ++c) n.val(r, c - c0) = va(r, c);
    }
    n.needs_grad = node_needs_grad(a);
    return push(n);
}

int Tape::concat_cols(std::span<const int> parts) {
    assert(!parts.empty());
    int rows = value(parts[0]).rows;
    int cols = 0;
    bool needs = false;
    for (int p : parts) {
        assert(value(p).rows == rows);
        cols += value(p).cols;
        needs = needs || node_needs_grad(p);
    }
    Node n;
    n.op = Op::concat_cols;
    n.parts.assign(parts.begin(), parts.end());
    n.val = Mat(rows, cols);
    int offset = 0;
    for (int p : parts) {
        const Mat& vp = value(p);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < vp.cols; ++c) n.val(r, offset + c) = vp(r, c);
        }
        offset += vp.cols;
    }
    n.needs_grad = needs;
    return push(n);
}

int Tape::concat_rows(int a, int b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    assert(va.cols == vb.cols);
    Node n;
    n.op = Op::concat_rows;
    n.a = a;
    n.b = b;
    n.val = Mat(va.rows + vb.rows, va.cols);
    for (int r = 0; r < va.rows; ++r) {
        for (int c = 0; c < va.cols; ++c) n.val(r, c) = va(r, c);
    }
    for (int r = 0; r < vb.rows; ++r) {
        for (int c = 0; c < vb.cols; ++c) n.val(va.rows + r, c) = vb(r, c);
    }
    n.needs_grad = node_needs_grad(a) || node_needs_grad(b);
    return push(n);
}

int Tape::mean_rows(int a) {
    const Mat& va = value(a);
    Node n;
    n.op = Op::mean_rows;
    n.a = a;
    n.val = Mat(1, va.cols);
    for (int r = 0; r < va.rows; ++r) {
        for (int c = 0; c < va.cols; ++c) n.val(0, c) += va(r, c);
    }
    for (int c = 0; c < va.cols; ++c) n.val(0, c) /= va.rows;
    n.needs_grad = node_needs_grad(a);
    return push(n);
}

int Tape::dropout(int a, double rate, Rng& rng) {
    assert(rate >= 0.0 && rate < 1.0);
    if (rate == 0.0) return a;
    const Mat& va = value(a);
    Node n;
    n.op = Op::dropout;
    n.a = a;
    n.aux = Mat(va.rows, va.cols);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (auto& m : n.aux.d) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
    n.val = va;
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val.d[i] *= n.aux.d[i];
    n.needs_grad = node_needs_grad(a);
    return push(n);
}

int Tape::cross_entropy_sum(int logits, std::span<const TokenId> targets) {
    const Mat& vl = value(logits);
    assert(static_cast<int>(targets.size()) == vl.rows);
    Node n;
    n.op = Op::cross_entropy;
    n.a = logits;
    n.ids.assign(targets.begin(), targets.end());
    n.aux = Mat(vl.rows, vl.cols);  // softmax probabilities
    n.val = Mat(1, 1);
    ce_logprobs_.assign(targets.size(), 0.0);
    double loss = 0.0;
    for (int r = 0; r < vl.rows; ++r) {
        double m = vl(r, 0);
        for (int c = 1; c < vl.cols; ++c) m = std::max(m, vl(r, c));
        double sum = 0.0;
        for (int c = 0; c < vl.cols; ++c) {
            double e = std::exp(vl(r, c) - m);
            n.aux(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < vl.cols; ++c) n.aux(r, c) /= sum;
        assert(targets[static_cast<std::size_t>(r)] >= 0 &&
               targets[static_cast<std::size_t>(r)] < vl.cols);
        double logprob = vl(r, targets[static_cast<std::size_t>(r)]) - m - std::log(sum);
        ce_logprobs_[static_cast<std::size_t>(r)] = logprob;
        loss -= logprob;
    }
    n.val(0, 0) = loss;
    n.needs_grad = node_needs_grad(logits);
    return push(n);
}

void Tape::backward(int node) {
    assert(value(node).rows == 1 && value(node).cols == 1);
    grad(node)(0, 0) = 1.0;

    for (int id = node; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        const Mat& g = n.grad;
        switch (n.op) {
            case Op::input:
                break;
            case Op::param: {
                assert(sink_ != nullptr);
                Mat& acc = (*sink_)[static_cast<std::size_t>(n.param)];
                for (std::size_t i = 0; i < acc.size(); ++i) acc.d[i] += g.d[i];
                break;
            }
            case Op::embed: {
                assert(sink_ != nullptr);
                Mat& acc = (*sink_)[static_cast<std::size_t>(n.param)];
                for (std::size_t i = 0; i < n.ids.size(); ++i) {
                    for (int c = 0; c < g.cols; ++c) {
                        acc(n.ids[i], c) += g(static_cast<int>(i), c);
                    }
                }
                break;
            }
            case Op::matmul: {
                if (node_needs_grad(n.a)) gemm_nt(g, value(n.b), grad(n.a), true);
                if (node_needs_grad(n.b)) gemm_tn(value(n.a), g, grad(n.b), true);
                break;
            }
            case Op::matmul_nt: {
                if (node_needs_grad(n.a)) gemm_nn(g, value(n.b), grad(n.a), true);
                if (node_needs_grad(n.b)) gemm_tn(g, value(n.a), grad(n.b), true);
                break;
            }
            case Op::add: {
                for (int operand : {n.a, n.b}) {
                    if (!node_needs_grad(operand)) continue;
                    Mat& go = grad(operand);
                    for (std::size_t i = 0; i < go.size(); ++i) go.d[i] += g.d[i];
                }
                break;
            }
            case Op::add_rowvec: {
                if (node_needs_grad(n.a)) {
                    Mat& ga = grad(n.a);
                    for (std::size_t i = 0; i < ga.size(); ++i) ga.d[i] += g.d[i];
                }
                if (node_needs_grad(n.b)) {
                    Mat& gr = grad(n.b);
                    for (int r = 0; r < g.rows; ++r) {
                        for (int c = 0; c < g.cols; ++c) gr(0, c) += g(r, c);
                    }
                }
                break;
            }
            case Op::add_const:
            case Op::dropout: {
                if (!node_needs_grad(n.a)) break;
                Mat& ga = grad(n.a);
                if (n.op == Op::dropout) {
                    for (std::size_t i = 0; i < ga.size(); ++i) ga.d[i] += g.d[i] * n.aux.d[i];
                } else {
                    for (std::size_t i = 0; i < ga.size(); ++i) ga.d[i] += g.d[i];
                }
                break;
            }
            case Op::scale: {
                if (!node_needs_grad(n.a)) break;
                Mat& ga = grad(n.a);
                for (std::size_t i = 0; i < ga.size(); ++i) ga.d[i] += g.d[i] * n.s;
                break;
            }
            case Op::gelu: {
                if (!node_needs_grad(n.a)) break;
                Mat& ga = grad(n.a);
                const Mat& x = value(n.a);
                for (std::size_t i = 0; i < ga.size(); ++i) {
                    double xi = x.d[i];
                    double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
                    double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
                    ga.d[i] += g.d[i] * (cdf + xi * pdf);
                }
                break;
            }
            case Op::softmax_rows: {
                if (!node_needs_grad(n.a)) break;
                Mat& ga = grad(n.a);
                const Mat& y = n.val;
                for (int r = 0; r < y.rows; ++r) {
                    double dot = 0.0;
                    for (int c = 0; c < y.cols; ++c) dot += g(r, c) * y(r, c);
                    for (int c = 0; c < y.cols; ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
                }
                break;
            }
            case Op::layernorm: {
                const Mat& vg = value(n.b);
                const int cols = n.val.cols;
                if (node_needs_grad(n.b)) {
                    Mat& ggain = grad(n.b);
                    for (int r = 0; r < g.rows; ++r) {
                        for (int c = 0; c < cols; ++c) ggain(0, c) += g(r, c) * n.aux(r, c);
                    }
                }
                if (node_needs_grad(n.c)) {
                    Mat& gbias = grad(n.c);
                    for (int r = 0; r < g.rows; ++r) {
                        for (int c = 0; c < cols; ++c) gbias(0, c) += g(r, c);
                    }
                }
                if (node_needs_grad(n.a)) {
                    Mat& ga = grad(n.a);
                    for (int r = 0; r < g.rows; ++r) {
                        double inv_std = n.aux(r, cols);
                        double sum_dxhat = 0.0;
                        double sum_dxhat_xhat = 0.0;
                        for (int c = 0; c < cols; ++c) {
                            double dxhat = g(r, c) * vg(0, c);
                            sum_dxhat += dxhat;
                            sum_dxhat_xhat += dxhat * n.aux(r, c);
                        }
                        for (int c = 0; c < cols; ++c) {
                            double dxhat = g(r, c) * vg(0, c);
                            ga(r, c) += inv_std * (dxhat - sum_dxhat / cols -
                                                   n.aux(r, c) * sum_dxhat_xhat / cols);
                        }
                    }
                }
                break;
            }
            case Op::slice_cols: {
                if (!node_needs_grad(n.a)) break;
                Mat& ga = grad(n.a);
                for (int r = 0; r < g.rows; ++r) {
                    for (int c = 0; c < g.cols; ++c) ga(r, n.i0 + c) += g(r, c);
                }
                break;
            }
            case Op::concat_cols: {
                int offset = 0;
                for (int p : n.parts) {
                    const Mat& vp = value(p);
                    if (node_needs_grad(p)) {
                        Mat& gp = grad(p);
                        for (int r = 0; r < g.rows; ++r) {
                            for (int c = 0; c < vp.cols; ++c) gp(r, c) += g(r, offset + c);
                        }
                    }
                    offset += vp.cols;
                }
                break;
            }
            case Op::concat_rows: {
                const Mat& va = value(n.a);
                if (node_needs_grad(n.a)) {
                    Mat& ga = grad(n.a);
                    for (int r = 0; r < va.rows; ++r) {
                        for (int c = 0; c < g.cols; ++c) ga(r, c) += g(r, c);
                    }
                }
                if (node_needs_grad(n.b)) {
                    Mat& gb = grad(n.b);
                    for (int r = 0; r < gb.rows; ++r) {
                        for (int c = 0; c < g.cols; ++c) gb(r, c) += g(va.rows + r, c);
                    }
                }
                break;
            }
            case Op::mean_rows: {
                if (!node_needs_grad(n.a)) break;
                Mat& ga = grad(n.a);
                const double inv = 1.0 / ga.rows;
                for (int r = 0; r < ga.rows; ++r) {
                    for (int c = 0; c < ga.cols; ++c) ga(r, c) += g(0, c) * inv;
                }
                break;
            }
            case Op::cross_entropy: {
                if (!node_needs_grad(n.a)) break;
                Mat& ga = grad(n.a);
                const double gs = g(0, 0);
                for (int r = 0; r < ga.rows; ++r) {
                    for (int c = 0; c < ga.cols; ++c) ga(r, c) += gs * n.aux(r, c);
                    ga(r, n.ids[static_cast<std::size_t>(r)]) -= gs;
                }
                break;
            }
        }
    }
}

}  // namespace v2t
