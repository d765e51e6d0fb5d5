#include "flowlab/nnet.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace flowlab {

void NetConfig::validate() const {
    if (blocks_per_stage < 1) throw std::invalid_argument("NetConfig: blocks_per_stage must be >= 1");
    if (input_size < 8 || input_size % 8 != 0)
        throw std::invalid_argument("NetConfig: input_size must be a multiple of 8");
    for (int s = 1; s < 4; ++s)
        if (channels[s] < channels[s - 1])
            throw std::invalid_argument("NetConfig: channels must be nondecreasing across stages");
    if (channels[0] < 1) throw std::invalid_argument("NetConfig: channels must be positive");
}

std::uint64_t NetConfig::hash() const {
    std::ostringstream os;
    os << "net:" << channels[0] << ',' << channels[1] << ',' << channels[2] << ',' << channels[3]
       << ";b=" << blocks_per_stage << ";in=" << input_size << ";skip=" << skip_connections;
    return fnv1a64(os.str());
}

std::uint64_t TrainConfig::hash() const {
    std::ostringstream os;
    os << "train:lr=" << lr << ";b1=" << beta1 << ";b2=" << beta2 << ";eps=" << eps
       << ";wd=" << weight_decay << ";bs=" << batch_size << ";ep=" << max_epochs
       << ";acc=" << target_accuracy << ";seed=" << seed;
    return fnv1a64(os.str());
}

template <typename T>
std::vector<T> normalize_input(const GrayImage& img) {
    const std::size_t n = img.pixels.size();
    double mean = 0.0;
    for (auto p : img.pixels) mean += p;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (auto p : img.pixels) var += (p - mean) * (p - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0)
        throw std::invalid_argument("normalize_input: constant image has no scale");
    const double inv = 1.0 / std::sqrt(var);
    std::vector<T> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<T>((img.pixels[i] - mean) * inv);
    return out;
}

template std::vector<float> normalize_input<float>(const GrayImage&);
template std::vector<double> normalize_input<double>(const GrayImage&);

template <typename T>
StageNetT<T>::StageNetT(const NetConfig& config) : config_(config) {
    config_.validate();

    std::size_t off = 0;
    auto add_tensor = [&](const std::string& name, std::vector<int> shape) {
        std::size_t count = 1;
        for (int d : shape) count *= static_cast<std::size_t>(d);
        tensors_.push_back({name, std::move(shape), off, count});
        const std::size_t at = off;
        off += count;
        return at;
    };

    int hw = config_.input_size;
    int cin = 1;
    for (int s = 0; s < 4; ++s) {
        const int cout = config_.channels[s];
        for (int b = 0; b < config_.blocks_per_stage; ++b) {
            ConvSpec spec;
            spec.cin = (b == 0) ? cin : cout;
            spec.cout = cout;
            spec.stride = (s > 0 && b == 0) ? 2 : 1;
            spec.in_hw = hw;
            spec.out_hw = (spec.stride == 2) ? hw / 2 : hw;
            spec.skip = config_.skip_connections && spec.stride == 1 && spec.cin == spec.cout;
            spec.capture_stage = (b == config_.blocks_per_stage - 1) ? s : -1;
            const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
            spec.w_off = add_tensor(name + ".weight", {spec.cout, spec.cin, 3, 3});
            spec.b_off = add_tensor(name + ".bias", {spec.cout});
            convs_.push_back(spec);
            hw = spec.out_hw;
        }
        cin = cout;
    }
    // stem is folded into stage1.block0 (cin=1); the head follows the pool
    head_w_off_ = add_tensor("head.weight", {config_.channels[3]});
    head_b_off_ = add_tensor("head.bias", {1});
    params_.assign(off, T(0));
}

template <typename T>
int StageNetT<T>::stage_hw(int stage) const {
    int hw = config_.input_size;
    for (int s = 1; s <= stage; ++s) hw /= 2;
    return hw;
}

template <typename T>
void StageNetT<T>::init_params(Rng& rng) {
    std::fill(params_.begin(), params_.end(), T(0));
    for (const auto& conv : convs_) {
        const double std = std::sqrt(2.0 / (conv.cin * 9.0));
        for (std::size_t i = 0; i < static_cast<std::size_t>(conv.cout) * conv.cin * 9; ++i)
            params_[conv.w_off + i] = static_cast<T>(rng.normal(0.0, std));
        // biases stay zero
    }
    // zero-initialized head: every input starts at probability 1/2
}

namespace {

// The 3×3 convolutions run as im2col + register-blocked GEMM. All reduction
// orders are fixed (sequential in k inside the microkernel, fixed block
// order outside), so results are bit-reproducible at any thread count.

// C(M,N) += A(M,K)·B(K,N), row-major with leading strides lda/ldb/ldc.
// 4×16 microkernel with one accumulator array per output row, the form the
// vectorizer register-promotes.
template <typename T>
void gemm_acc(const T* A, int lda, const T* B, int ldb, T* C, int ldc, int M, int N, int K) {
    constexpr int NR = 16;
    // n-block outer so the K×NR slice of B stays cached across all rows of A
    int n0 = 0;
    for (; n0 + NR <= N; n0 += NR) {
        const T* b = B + n0;
        int m0 = 0;
        for (; m0 + 4 <= M; m0 += 4) {
            const T* a0 = A + static_cast<std::size_t>(m0 + 0) * lda;
            const T* a1 = A + static_cast<std::size_t>(m0 + 1) * lda;
            const T* a2 = A + static_cast<std::size_t>(m0 + 2) * lda;
            const T* a3 = A + static_cast<std::size_t>(m0 + 3) * lda;
            T acc0[NR] = {}, acc1[NR] = {}, acc2[NR] = {}, acc3[NR] = {};
            for (int k = 0; k < K; ++k) {
                const T* brow = b + static_cast<std::size_t>(k) * ldb;
                const T v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
                for (int j = 0; j < NR; ++j) {
                    const T bj = brow[j];
                    acc0[j] += v0 * bj;
                    acc1[j] += v1 * bj;
                    acc2[j] += v2 * bj;
                    acc3[j] += v3 * bj;
                }
            }
            T* c0 = C + static_cast<std::size_t>(m0 + 0) * ldc + n0;
            T* c1 = C + static_cast<std::size_t>(m0 + 1) * ldc + n0;
            T* c2 = C + static_cast<std::size_t>(m0 + 2) * ldc + n0;
            T* c3 = C + static_cast<std::size_t>(m0 + 3) * ldc + n0;
            for (int j = 0; j < NR; ++j) {
                c0[j] += acc0[j];
                c1[j] += acc1[j];
                c2[j] += acc2[j];
                c3[j] += acc3[j];
            }
        }
        for (; m0 < M; ++m0) {
            const T* arow = A + static_cast<std::size_t>(m0) * lda;
            T acc[NR] = {};
            for (int k = 0; k < K; ++k) {
                const T* brow = b + static_cast<std::size_t>(k) * ldb;
                const T a = arow[k];
                for (int j = 0; j < NR; ++j) acc[j] += a * brow[j];
            }
            T* crow = C + static_cast<std::size_t>(m0) * ldc + n0;
            for (int j = 0; j < NR; ++j) crow[j] += acc[j];
        }
    }
    // remainder columns
    for (; n0 < N; ++n0) {
        for (int m = 0; m < M; ++m) {
            const T* arow = A + static_cast<std::size_t>(m) * lda;
            T s = 0;
            for (int k = 0; k < K; ++k) s += arow[k] * B[static_cast<std::size_t>(k) * ldb + n0];
            C[static_cast<std::size_t>(m) * ldc + n0] += s;
        }
    }
}

// cols(K, M) with K = cin·9 and M = out_hw², zero padding of one pixel.
template <typename T>
void im2col_3x3(const T* in, int cin, int in_hw, int stride, int out_hw, T* cols) {
    const std::size_t m = static_cast<std::size_t>(out_hw) * out_hw;
    for (int ci = 0; ci < cin; ++ci) {
        const T* plane = in + static_cast<std::size_t>(ci) * in_hw * in_hw;
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                T* dst = cols + (static_cast<std::size_t>(ci) * 9 + (ky + 1) * 3 + (kx + 1)) * m;
                for (int yo = 0; yo < out_hw; ++yo) {
                    T* drow = dst + static_cast<std::size_t>(yo) * out_hw;
                    const int yy = stride * yo + ky;
                    if (yy < 0 || yy >= in_hw) {
                        for (int xo = 0; xo < out_hw; ++xo) drow[xo] = T(0);
                        continue;
                    }
                    const T* srow = plane + static_cast<std::size_t>(yy) * in_hw;
                    if (stride == 1) {
                        const int x_lo = (kx < 0) ? 1 : 0;
                        const int x_hi = (kx > 0) ? out_hw - 1 : out_hw;
                        if (x_lo) drow[0] = T(0);
                        for (int xo = x_lo; xo < x_hi; ++xo) drow[xo] = srow[xo + kx];
                        if (x_hi < out_hw) drow[out_hw - 1] = T(0);
                    } else {
                        for (int xo = 0; xo < out_hw; ++xo) {
                            const int xx = 2 * xo + kx;
                            drow[xo] = (xx < 0 || xx >= in_hw) ? T(0) : srow[xx];
                        }
                    }
                }
            }
        }
    }
}

// transpose of im2col: scatter-add cols-shaped gradients back onto the input.
template <typename T>
void col2im_3x3(const T* cols, int cin, int in_hw, int stride, int out_hw, T* din) {
    const std::size_t m = static_cast<std::size_t>(out_hw) * out_hw;
    for (int ci = 0; ci < cin; ++ci) {
        T* plane = din + static_cast<std::size_t>(ci) * in_hw * in_hw;
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                const T* src = cols + (static_cast<std::size_t>(ci) * 9 + (ky + 1) * 3 + (kx + 1)) * m;
                for (int yo = 0; yo < out_hw; ++yo) {
                    const int yy = stride * yo + ky;
                    if (yy < 0 || yy >= in_hw) continue;
                    const T* srow = src + static_cast<std::size_t>(yo) * out_hw;
                    T* drow = plane + static_cast<std::size_t>(yy) * in_hw;
                    if (stride == 1) {
                        const int x_lo = (kx < 0) ? 1 : 0;
                        const int x_hi = (kx > 0) ? out_hw - 1 : out_hw;
                        for (int xo = x_lo; xo < x_hi; ++xo) drow[xo + kx] += srow[xo];
                    } else {
                        for (int xo = 0; xo < out_hw; ++xo) {
                            const int xx = 2 * xo + kx;
                            if (xx >= 0 && xx < in_hw) drow[xx] += srow[xo];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv3x3_forward(const T* in, int cin, int in_hw, const T* w, const T* bias, int cout,
                     int stride, T* out, int out_hw, std::vector<T>& cols_scratch) {
    const std::size_t m = static_cast<std::size_t>(out_hw) * out_hw;
    const int k = cin * 9;
    cols_scratch.resize(static_cast<std::size_t>(k) * m);
    im2col_3x3(in, cin, in_hw, stride, out_hw, cols_scratch.data());
    for (int co = 0; co < cout; ++co) {
        T* row = out + static_cast<std::size_t>(co) * m;
        const T b = bias[co];
        for (std::size_t i = 0; i < m; ++i) row[i] = b;
    }
    gemm_acc(w, k, cols_scratch.data(), static_cast<int>(m), out, static_cast<int>(m), cout,
             static_cast<int>(m), k);
}

// din += W^T · dout, routed through col2im. din must be zero-initialized.
template <typename T>
void conv3x3_backward_data(const T* dout, int cout, int out_hw, const T* w, int cin, int stride,
                           T* din, int in_hw, std::vector<T>& cols_scratch,
                           std::vector<T>& wt_scratch) {
    const std::size_t m = static_cast<std::size_t>(out_hw) * out_hw;
    const int k = cin * 9;
    wt_scratch.resize(static_cast<std::size_t>(k) * cout);
    for (int co = 0; co < cout; ++co)
        for (int kk = 0; kk < k; ++kk)
            wt_scratch[static_cast<std::size_t>(kk) * cout + co] =
                w[static_cast<std::size_t>(co) * k + kk];
    cols_scratch.assign(static_cast<std::size_t>(k) * m, T(0));
    gemm_acc(wt_scratch.data(), cout, dout, static_cast<int>(m), cols_scratch.data(),
             static_cast<int>(m), k, static_cast<int>(m), cout);
    col2im_3x3(cols_scratch.data(), cin, in_hw, stride, out_hw, din);
}

// Dot product with four independent 8-lane accumulator chains: fixed
// reassociation (deterministic) while keeping the FMA pipeline full.
template <typename T>
T dot_fast(const T* a, const T* b, std::size_t n) {
    T acc0[8] = {}, acc1[8] = {}, acc2[8] = {}, acc3[8] = {};
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        for (int l = 0; l < 8; ++l) acc0[l] += a[i + l] * b[i + l];
        for (int l = 0; l < 8; ++l) acc1[l] += a[i + 8 + l] * b[i + 8 + l];
        for (int l = 0; l < 8; ++l) acc2[l] += a[i + 16 + l] * b[i + 16 + l];
        for (int l = 0; l < 8; ++l) acc3[l] += a[i + 24 + l] * b[i + 24 + l];
    }
    for (int l = 0; l < 8; ++l) acc0[l] += acc2[l];
    for (int l = 0; l < 8; ++l) acc1[l] += acc3[l];
    T tail = 0;
    for (; i < n; ++i) tail += a[i] * b[i];
    const T s0 = ((acc0[0] + acc0[1]) + (acc0[2] + acc0[3])) +
                 ((acc0[4] + acc0[5]) + (acc0[6] + acc0[7]));
    const T s1 = ((acc1[0] + acc1[1]) + (acc1[2] + acc1[3])) +
                 ((acc1[4] + acc1[5]) + (acc1[6] + acc1[7]));
    return s0 + s1 + tail;
}

// dW(cout, K) += dout(cout, M) · cols(K, M)^T; cols is reused from the
// forward pass of the same layer. The reduction over M runs in fixed-order
// chunks sized so the cols slice stays in L2.
template <typename T>
void conv3x3_backward_weights(const T* dout, int cout, int out_hw, const T* cols, int cin,
                              T* dw, T* db) {
    const std::size_t m = static_cast<std::size_t>(out_hw) * out_hw;
    const int k = cin * 9;
    for (int co = 0; co < cout; ++co) {
        const T* drow = dout + static_cast<std::size_t>(co) * m;
        T bacc = 0;
        for (std::size_t i = 0; i < m; ++i) bacc += drow[i];
        db[co] += bacc;
    }

    constexpr std::size_t kChunk = 2048;
    for (std::size_t m0 = 0; m0 < m; m0 += kChunk) {
        const std::size_t len = std::min(kChunk, m - m0);
        for (int kk = 0; kk < k; ++kk) {
            const T* crow = cols + static_cast<std::size_t>(kk) * m + m0;
            for (int co = 0; co < cout; ++co)
                dw[static_cast<std::size_t>(co) * k + kk] +=
                    dot_fast(dout + static_cast<std::size_t>(co) * m + m0, crow, len);
        }
    }
}

template <typename T>
T stable_sigmoid(T z) {
    if (z >= 0) {
        const T e = std::exp(-z);
        return 1 / (1 + e);
    }
    const T e = std::exp(z);
    return e / (1 + e);
}

template <typename T>
T bce_with_logit(T z, T label) {
    // softplus(z) − label·z, stable in both tails
    const T sp = (z > 0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return sp - label * z;
}

} // namespace

template <typename T>
T StageNetT<T>::forward(const std::vector<T>& input, StageActivations<T>* stages) const {
    const std::size_t in_count = static_cast<std::size_t>(config_.input_size) * config_.input_size;
    if (input.size() != in_count)
        throw std::invalid_argument("StageNet::forward: input size mismatch");

    std::vector<T> cur(input), next, cols;
    int cur_ch = 1;
    for (const auto& conv : convs_) {
        next.resize(static_cast<std::size_t>(conv.cout) * conv.out_hw * conv.out_hw);
        conv3x3_forward(cur.data(), conv.cin, conv.in_hw, params_.data() + conv.w_off,
                        params_.data() + conv.b_off, conv.cout, conv.stride, next.data(),
                        conv.out_hw, cols);
        if (conv.skip)
            for (std::size_t i = 0; i < next.size(); ++i) next[i] += cur[i];
        for (T& v : next) v = v > 0 ? v : T(0);
        cur.swap(next);
        cur_ch = conv.cout;
        if (stages && conv.capture_stage >= 0) {
            stages->data[conv.capture_stage] = cur;
            stages->channels[conv.capture_stage] = conv.cout;
            stages->hw[conv.capture_stage] = conv.out_hw;
        }
    }

    const int hw = convs_.back().out_hw;
    const T inv_area = T(1) / static_cast<T>(hw * hw);
    T logit = params_[head_b_off_];
    for (int c = 0; c < cur_ch; ++c) {
        T acc = 0;
        const T* plane = cur.data() + static_cast<std::size_t>(c) * hw * hw;
        for (int i = 0; i < hw * hw; ++i) acc += plane[i];
        logit += params_[head_w_off_ + c] * acc * inv_area;
    }
    return logit;
}

template <typename T>
T StageNetT<T>::forward_backward(const std::vector<T>& input, T label, std::vector<T>& grad) const {
    if (grad.size() != params_.size()) grad.assign(params_.size(), T(0));

    // forward, retaining every post-ReLU activation and each layer's im2col
    // matrix (reused by the weight-gradient pass)
    std::vector<std::vector<T>> acts;
    std::vector<std::vector<T>> cols_per_layer(convs_.size());
    acts.reserve(convs_.size() + 1);
    acts.push_back(input);
    for (std::size_t li = 0; li < convs_.size(); ++li) {
        const auto& conv = convs_[li];
        std::vector<T> out(static_cast<std::size_t>(conv.cout) * conv.out_hw * conv.out_hw);
        conv3x3_forward(acts.back().data(), conv.cin, conv.in_hw, params_.data() + conv.w_off,
                        params_.data() + conv.b_off, conv.cout, conv.stride, out.data(),
                        conv.out_hw, cols_per_layer[li]);
        if (conv.skip) {
            const auto& prev = acts.back();
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += prev[i];
        }
        for (T& v : out) v = v > 0 ? v : T(0);
        acts.push_back(std::move(out));
    }

    const int c4 = config_.channels[3];
    const int hw = convs_.back().out_hw;
    const T inv_area = T(1) / static_cast<T>(hw * hw);
    std::vector<T> pooled(c4);
    {
        const auto& last = acts.back();
        for (int c = 0; c < c4; ++c) {
            T acc = 0;
            const T* plane = last.data() + static_cast<std::size_t>(c) * hw * hw;
            for (int i = 0; i < hw * hw; ++i) acc += plane[i];
            pooled[c] = acc * inv_area;
        }
    }
    T logit = params_[head_b_off_];
    for (int c = 0; c < c4; ++c) logit += params_[head_w_off_ + c] * pooled[c];

    const T loss = bce_with_logit(logit, label);
    const T dz = stable_sigmoid(logit) - label;

    // head backward
    grad[head_b_off_] += dz;
    std::vector<T> dcur(acts.back().size());
    for (int c = 0; c < c4; ++c) {
        grad[head_w_off_ + c] += dz * pooled[c];
        const T dplane = dz * params_[head_w_off_ + c] * inv_area;
        T* dst = dcur.data() + static_cast<std::size_t>(c) * hw * hw;
        for (int i = 0; i < hw * hw; ++i) dst[i] = dplane;
    }

    // conv blocks in reverse
    std::vector<T> cols_scratch, wt_scratch;
    for (int li = static_cast<int>(convs_.size()) - 1; li >= 0; --li) {
        const auto& conv = convs_[li];
        const auto& out_act = acts[li + 1];
        const auto& in_act = acts[li];

        // ReLU gate
        for (std::size_t i = 0; i < dcur.size(); ++i)
            if (out_act[i] <= 0) dcur[i] = 0;

        conv3x3_backward_weights(dcur.data(), conv.cout, conv.out_hw, cols_per_layer[li].data(),
                                 conv.cin, grad.data() + conv.w_off, grad.data() + conv.b_off);
        if (li > 0) {
            std::vector<T> din(in_act.size(), T(0));
            conv3x3_backward_data(dcur.data(), conv.cout, conv.out_hw, params_.data() + conv.w_off,
                                  conv.cin, conv.stride, din.data(), conv.in_hw, cols_scratch,
                                  wt_scratch);
            if (conv.skip)
                for (std::size_t i = 0; i < din.size(); ++i) din[i] += dcur[i];
            dcur.swap(din);
        }
    }
    return loss;
}

template <typename T>
T StageNetT<T>::batch_gradient(const std::vector<const std::vector<T>*>& inputs,
                               const std::vector<T>& labels, double weight_decay,
                               std::vector<T>& grad) const {
    const std::size_t b = inputs.size();
    if (b == 0 || labels.size() != b)
        throw std::invalid_argument("batch_gradient: empty batch or label mismatch");

    // per-image gradient slots keep the reduction order independent of the
    // thread schedule
    std::vector<std::vector<T>> slots(b);
    std::vector<T> losses(b, T(0));
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < b; ++i)
        losses[i] = forward_backward(*inputs[i], labels[i], slots[i]);

    grad.assign(params_.size(), T(0));
    T loss = 0;
    const T inv_b = T(1) / static_cast<T>(b);
    for (std::size_t i = 0; i < b; ++i) {
        loss += losses[i];
        for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += slots[i][p];
    }
    loss *= inv_b;
    for (std::size_t p = 0; p < grad.size(); ++p) grad[p] *= inv_b;

    if (weight_decay > 0.0) {
        const T wd = static_cast<T>(weight_decay);
        T reg = 0;
        for (std::size_t p = 0; p < params_.size(); ++p) {
            grad[p] += wd * params_[p];
            reg += params_[p] * params_[p];
        }
        loss += T(0.5) * wd * reg;
    }
    return loss;
}

template <typename T>
void adam_update(std::vector<T>& params, const std::vector<T>& grad, AdamState<T>& state,
                 const TrainConfig& config) {
    if (params.size() != grad.size() || state.m.size() != params.size())
        throw std::invalid_argument("adam_update: shape mismatch");
    state.step += 1;
    const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
    const T bc1 = T(1) - static_cast<T>(std::pow(config.beta1, static_cast<double>(state.step)));
    const T bc2 = T(1) - static_cast<T>(std::pow(config.beta2, static_cast<double>(state.step)));
    const T lr = static_cast<T>(config.lr), eps = static_cast<T>(config.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * grad[i];
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * grad[i] * grad[i];
        const T mhat = state.m[i] / bc1;
        const T vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template class StageNetT<float>;
template class StageNetT<double>;
template void adam_update<float>(std::vector<float>&, const std::vector<float>&, AdamState<float>&,
                                 const TrainConfig&);
template void adam_update<double>(std::vector<double>&, const std::vector<double>&,
                                  AdamState<double>&, const TrainConfig&);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["channels"] = ckpt.net_config.channels;
    header["blocks_per_stage"] = ckpt.net_config.blocks_per_stage;
    header["input_size"] = ckpt.net_config.input_size;
    header["skip_connections"] = ckpt.net_config.skip_connections;
    header["epoch"] = ckpt.epoch;
    header["seed"] = ckpt.seed;
    header["config_hash"] = ckpt.config_hash;
    header["adam_step"] = ckpt.adam.step;
    header["param_count"] = ckpt.params.size();
    header["class_labels"] = ckpt.class_labels;

    StageNetT<float> net(ckpt.net_config);
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& t : net.tensors())
        dir.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}, {"count", t.count}});
    header["tensors"] = dir;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const std::string line = header.dump();
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.put('\n');
    auto write_block = [&](const std::vector<float>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(float)));
    };
    write_block(ckpt.params);
    write_block(ckpt.adam.m);
    write_block(ckpt.adam.v);
    if (!out) throw std::runtime_error("save_checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_checkpoint: missing header");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded()) throw std::runtime_error("load_checkpoint: malformed header");

    Checkpoint ckpt;
    ckpt.net_config.channels = header["channels"].get<std::array<int, 4>>();
    ckpt.net_config.blocks_per_stage = header["blocks_per_stage"].get<int>();
    ckpt.net_config.input_size = header["input_size"].get<int>();
    ckpt.net_config.skip_connections = header["skip_connections"].get<bool>();
    ckpt.epoch = header["epoch"].get<int>();
    ckpt.seed = header["seed"].get<std::uint64_t>();
    ckpt.config_hash = header["config_hash"].get<std::uint64_t>();
    ckpt.adam.step = header["adam_step"].get<long long>();
    ckpt.class_labels = header["class_labels"].get<std::array<std::string, 2>>();

    const std::size_t count = header["param_count"].get<std::size_t>();
    auto read_block = [&](std::vector<float>& v) {
        v.resize(count);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
    };
    read_block(ckpt.params);
    read_block(ckpt.adam.m);
    read_block(ckpt.adam.v);
    if (!in) throw std::runtime_error("load_checkpoint: truncated payload in " + path);
    return ckpt;
}

ManifestData load_manifest_images(const DatasetManifest& manifest) {
    const auto labels = manifest.labels();
    if (labels.size() != 2)
        throw std::invalid_argument("load_manifest_images: need exactly two classes, got " +
                                    std::to_string(labels.size()));

    ManifestData data;
    data.train.class_names = {labels[0], labels[1]};
    data.test.class_names = {labels[0], labels[1]};
    for (const auto& row : manifest.rows) {
        LabeledImages& dst = (row.split == "test") ? data.test : data.train;
        GrayImage img = read_image(row.path);
        if (dst.image_size == 0) dst.image_size = img.width;
        if (img.width != dst.image_size || img.height != dst.image_size)
            throw std::invalid_argument("load_manifest_images: image size mismatch at " + row.path);
        dst.images.push_back(std::move(img));
        dst.labels.push_back(row.label == labels[1] ? 1 : 0);
    }
    return data;
}

namespace {

double accuracy_and_probs(const StageNet& net, const LabeledImages& set,
                          std::vector<double>* probs_out) {
    const std::size_t n = set.images.size();
    std::vector<double> probs(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<float> x = normalize_input<float>(set.images[i]);
        probs[i] = stable_sigmoid(static_cast<double>(net.forward(x)));
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int pred = probs[i] > 0.5 ? 1 : 0;
        if (pred == set.labels[i]) ++correct;
    }
    if (probs_out) *probs_out = std::move(probs);
    return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
}

} // namespace

TrainResult train(const ManifestData& data, const NetConfig& net_config,
                  const TrainConfig& train_config) {
    if (data.train.images.empty() || data.test.images.empty())
        throw std::invalid_argument("train: empty train or test split");

    TrainResult result;

    std::array<std::size_t, 2> counts{0, 0};
    for (int l : data.train.labels) counts[l]++;
    if (counts[0] == 0 || counts[1] == 0)
        throw std::invalid_argument("train: a class has no training images");
    const double ratio = static_cast<double>(std::max(counts[0], counts[1])) /
                         static_cast<double>(std::min(counts[0], counts[1]));
    if (ratio > 10.0)
        result.warnings.push_back("class imbalance " + std::to_string(ratio) + ":1");

    StageNet net(net_config);
    Rng init_rng(derive_seed(train_config.seed, "init"));
    net.init_params(init_rng);

    AdamState<float> adam;
    adam.init(net.param_count());

    // pre-normalized inputs (float): ~0.5 MB per 128² image
    const std::size_t n_train = data.train.images.size();
    std::vector<std::vector<float>> inputs(n_train);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n_train; ++i)
        inputs[i] = normalize_input<float>(data.train.images[i]);

    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    bool reached = false;
    int epoch = 0;
    for (epoch = 1; epoch <= train_config.max_epochs && !reached; ++epoch) {
        Rng shuffle_rng(derive_seed(train_config.seed, "shuffle:" + std::to_string(epoch)));
        for (std::size_t i = n_train - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_below(i + 1)]);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        std::vector<float> grad;
        for (std::size_t start = 0; start < n_train; start += train_config.batch_size) {
            const std::size_t stop = std::min(n_train, start + train_config.batch_size);
            std::vector<const std::vector<float>*> batch;
            std::vector<float> labels;
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(&inputs[order[i]]);
                labels.push_back(static_cast<float>(data.train.labels[order[i]]));
            }
            loss_sum += net.batch_gradient(batch, labels, train_config.weight_decay, grad);
            adam_update(net.params(), grad, adam, train_config);
            ++batches;
        }

        const double test_acc = accuracy_and_probs(net, data.test, nullptr);
        result.log.push_back({epoch, loss_sum / static_cast<double>(batches), test_acc});
        if (test_acc >= train_config.target_accuracy) reached = true;
    }

    result.reached_target = reached;
    result.checkpoint.net_config = net_config;
    result.checkpoint.params.assign(net.params().begin(), net.params().end());
    result.checkpoint.adam = adam;
    result.checkpoint.epoch = static_cast<int>(result.log.size());
    result.checkpoint.seed = train_config.seed;
    result.checkpoint.config_hash = mix64(net_config.hash() ^ train_config.hash());
    result.checkpoint.class_labels = data.train.class_names;
    return result;
}

StageNet net_from_checkpoint(const Checkpoint& ckpt) {
    StageNet net(ckpt.net_config);
    if (ckpt.params.size() != net.param_count())
        throw std::invalid_argument("net_from_checkpoint: parameter count mismatch");
    net.params().assign(ckpt.params.begin(), ckpt.params.end());
    return net;
}

EvalResult evaluate(const Checkpoint& ckpt, const LabeledImages& set) {
    StageNet net = net_from_checkpoint(ckpt);
    EvalResult result;
    result.accuracy = accuracy_and_probs(net, set, &result.probabilities);
    return result;
}

std::vector<double> predict(const Checkpoint& ckpt, const std::vector<GrayImage>& images) {
    LabeledImages set;
    set.images = images;
    set.labels.assign(images.size(), 0);
    if (!images.empty()) set.image_size = images.front().width;
    return evaluate(ckpt, set).probabilities;
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_train_log: cannot open " + path);
    out << "epoch,train_loss,test_acc\n";
    char buf[96];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", e.epoch, e.train_loss, e.test_accuracy);
        out << buf;
    }
}

} // namespace flowlab
