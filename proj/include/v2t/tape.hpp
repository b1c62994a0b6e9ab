#pragma once

#include <span>
#include <string>
#include <vector>

#include "v2t/mat.hpp"
#include "v2t/rng.hpp"

namespace v2t {

using TokenId = std::int32_t;

// Named parameter tensors in registration order (which is also checkpoint
// manifest order).
class ParamStore {
public:
    struct Entry {
        std::string name;
        Mat value;
    };

    int add(std::string name, Mat value) {
        entries_.push_back({std::move(name), std::move(value)});
        return static_cast<int>(entries_.size()) - 1;
    }
    std::size_t count() const { return entries_.size(); }
    Entry& entry(int i) { return entries_[static_cast<std::size_t>(i)]; }
    const Entry& entry(int i) const { return entries_[static_cast<std::size_t>(i)]; }
    Mat& value(int i) { return entries_[static_cast<std::size_t>(i)].value; }
    const Mat& value(int i) const { return entries_[static_cast<std::size_t>(i)].value; }

    std::vector<Mat> zero_grads() const {
        std::vector<Mat> g;
        g.reserve(entries_.size());
        for (const auto& e : entries_) g.push_back(Mat::zeros_like(e.value));
        return g;
    }

private:
    std::vector<Entry> entries_;
};

// Reverse-mode tape over 2-D matrices. One tape scores one sample; backward()
// accumulates parameter gradients into an external sink aligned with the
// ParamStore, so several tapes can run in parallel and be reduced in a fixed
// order afterwards.
class Tape {
public:
    explicit Tape(const ParamStore& params, std::vector<Mat>* grad_sink = nullptr)
        : params_(&params), sink_(grad_sink) {}

    int input(Mat value);                // constant, no gradient
    int param(int param_index);          // parameter leaf
    int embed(int table_param, std::span<const TokenId> ids);
    int matmul(int a, int b);            // A * B
    int matmul_nt(int a, int b);         // A * B^T
    int add(int a, int b);               // same shape
    int add_rowvec(int a, int rowvec);   // broadcast a [1,c] row over rows
    int add_const(int a, const Mat& c);  // e.g. positional encodings, masks
    int scale(int a, double s);
    int gelu(int a);
    int softmax_rows(int a);
    int layernorm(int a, int gain, int bias, double eps = 1e-5);
    int slice_cols(int a, int c0, int c1);
    int concat_cols(std::span<const int> parts);
    int concat_rows(int a, int b);
    int mean_rows(int a);  // -> [1, cols]
    int dropout(int a, double rate, Rng& rng);
    // Sum over rows of -log softmax(row)[target]; returns a [1,1] node.
    // Per-row log-probabilities are exposed through last_ce_logprobs().
    int cross_entropy_sum(int logits, std::span<const TokenId> targets);

    const Mat& value(int node) const { return nodes_[static_cast<std::size_t>(node)].val; }
    const std::vector<double>& last_ce_logprobs() const { return ce_logprobs_; }

    // Seeds d(node)=1 (node must be 1x1) and runs the reverse sweep.
    void backward(int node);

private:
    enum class Op {
        input,
        param,
        embed,
        matmul,
        matmul_nt,
        add,
        add_rowvec,
        add_const,
        scale,
        gelu,
        softmax_rows,
        layernorm,
        slice_cols,
        concat_cols,
        concat_rows,
        mean_rows,
        dropout,
        cross_entropy,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        int c = -1;          // third operand (layernorm bias)
        int param = -1;      // ParamStore index for param/embed
        double s = 0.0;      // scalar (scale factor, eps, slice start)
        int i0 = 0, i1 = 0;  // slice bounds
        std::vector<TokenId> ids;  // embed ids / CE targets
        std::vector<int> parts;    // concat_cols operands
        Mat aux;                   // op-specific cache (softmax probs, dropout mask, ...)
        Mat val;
        Mat grad;
        bool needs_grad = false;
    };

    int push(Node n);
    bool node_needs_grad(int id) const {
        return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad;
    }
    Mat& grad(int id);

    const ParamStore* params_;
    std::vector<Mat>* sink_;
    std::vector<Node> nodes_;
    std::vector<double> ce_logprobs_;
};

}  // namespace v2t
