#include "gateprune/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gateprune {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// Work is split into a fixed number of chunks regardless of thread count, so
// results are bitwise identical whether or not OpenMP is enabled.
constexpr int kChunks = 8;

template <typename Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    int chunks = static_cast<int>(std::min<std::size_t>(kChunks, n));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int c = 0; c < chunks; ++c) {
        std::size_t begin = n * static_cast<std::size_t>(c) / chunks;
        std::size_t end = n * static_cast<std::size_t>(c + 1) / chunks;
        fn(static_cast<std::size_t>(c), begin, end);
    }
}

struct ConvDims {
    int N, Ci, H, W;
    int Co, kh, kw;
    int stride, pad;
    int Ho, Wo;
    int K() const { return Ci * kh * kw; }
    int P() const { return Ho * Wo; }
};

int conv_out_extent(int in, int k, int stride, int pad, const char* axis) {
    int span = in + 2 * pad - k;
    if (span < 0 || span % stride != 0)
        throw ShapeError(std::string("conv2d: kernel/stride do not tile the ") + axis +
                         " axis: extent " + std::to_string(in) + ", kernel " + std::to_string(k) +
                         ", stride " + std::to_string(stride) + ", padding " + std::to_string(pad));
    return span / stride + 1;
}

void im2col(const float* in, const ConvDims& d, float* col) {
    const int P = d.P();
    for (int ci = 0; ci < d.Ci; ++ci) {
        const float* plane = in + static_cast<std::size_t>(ci) * d.H * d.W;
        for (int u = 0; u < d.kh; ++u) {
            for (int v = 0; v < d.kw; ++v) {
                float* dst = col + static_cast<std::size_t>((ci * d.kh + u) * d.kw + v) * P;
                if (d.pad == 0 && d.stride == 1) {
                    for (int ho = 0; ho < d.Ho; ++ho)
                        std::memcpy(dst + ho * d.Wo, plane + (ho + u) * d.W + v,
                                    sizeof(float) * static_cast<std::size_t>(d.Wo));
                    continue;
                }
                for (int ho = 0; ho < d.Ho; ++ho) {
                    int h = ho * d.stride - d.pad + u;
                    for (int wo = 0; wo < d.Wo; ++wo) {
                        int w = wo * d.stride - d.pad + v;
                        dst[ho * d.Wo + wo] =
                            (h >= 0 && h < d.H && w >= 0 && w < d.W) ? plane[h * d.W + w] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im_acc(const float* col, const ConvDims& d, float* dst) {
    const int P = d.P();
    for (int ci = 0; ci < d.Ci; ++ci) {
        float* plane = dst + static_cast<std::size_t>(ci) * d.H * d.W;
        for (int u = 0; u < d.kh; ++u) {
            for (int v = 0; v < d.kw; ++v) {
                const float* src = col + static_cast<std::size_t>((ci * d.kh + u) * d.kw + v) * P;
                for (int ho = 0; ho < d.Ho; ++ho) {
                    int h = ho * d.stride - d.pad + u;
                    if (h < 0 || h >= d.H) continue;
                    for (int wo = 0; wo < d.Wo; ++wo) {
                        int w = wo * d.stride - d.pad + v;
                        if (w < 0 || w >= d.W) continue;
                        plane[h * d.W + w] += src[ho * d.Wo + wo];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, int stride, int padding) {
    if (input.ndim() != 4)
        throw ShapeError("conv2d: input must be [N,Cin,H,W], got " + shape_str(input.shape()));
    if (weight.ndim() != 4)
        throw ShapeError("conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_str(weight.shape()));
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (padding < 0) throw ShapeError("conv2d: padding must be >= 0");

    ConvDims d;
    d.N = input.dim(0);
    d.Ci = input.dim(1);
    d.H = input.dim(2);
    d.W = input.dim(3);
    d.Co = weight.dim(0);
    d.kh = weight.dim(2);
    d.kw = weight.dim(3);
    d.stride = stride;
    d.pad = padding;
    if (weight.dim(1) != d.Ci)
        throw ShapeError("conv2d: channel mismatch on axis 1: input has " + std::to_string(d.Ci) +
                         " channels, weight expects " + std::to_string(weight.dim(1)));
    d.Ho = conv_out_extent(d.H, d.kh, stride, padding, "H");
    d.Wo = conv_out_extent(d.W, d.kw, stride, padding, "W");

    Tensor out = Tensor::zeros({d.N, d.Co, d.Ho, d.Wo});
    const int K = d.K(), P = d.P();
    const std::size_t in_stride = static_cast<std::size_t>(d.Ci) * d.H * d.W;
    const std::size_t out_stride = static_cast<std::size_t>(d.Co) * P;

    const float* in_ptr = input.data().data();
    const float* w_ptr = weight.data().data();
    float* out_ptr = out.data().data();

    parallel_chunks(static_cast<std::size_t>(d.N), [&](std::size_t, std::size_t b, std::size_t e) {
        std::vector<float> col(static_cast<std::size_t>(K) * P);
        CMapMat Wm(w_ptr, d.Co, K);
        for (std::size_t n = b; n < e; ++n) {
            im2col(in_ptr + n * in_stride, d, col.data());
            CMapMat Cm(col.data(), K, P);
            MapMat Ym(out_ptr + n * out_stride, d.Co, P);
            Ym.noalias() = Wm * Cm;
        }
    });

    auto in_impl = input.impl();
    auto w_impl = weight.impl();
    auto out_impl = out.impl().get();
    record_node(out, "conv2d", {input, weight}, [in_impl, w_impl, out_impl, d]() {
        const int K = d.K(), P = d.P();
        const std::size_t in_stride = static_cast<std::size_t>(d.Ci) * d.H * d.W;
        const std::size_t out_stride = static_cast<std::size_t>(d.Co) * P;
        const float* gout = out_impl->grad.data();
        const float* in_ptr = in_impl->data.data();
        const float* w_ptr = w_impl->data.data();

        if (w_impl->requires_grad) {
            // Per-chunk partials reduced in fixed chunk order.
            int chunks = static_cast<int>(std::min<std::size_t>(kChunks, static_cast<std::size_t>(d.N)));
            std::vector<std::vector<float>> partial(static_cast<std::size_t>(chunks));
            parallel_chunks(static_cast<std::size_t>(d.N),
                            [&](std::size_t c, std::size_t b, std::size_t e) {
                partial[c].assign(static_cast<std::size_t>(d.Co) * K, 0.0f);
                std::vector<float> col(static_cast<std::size_t>(K) * P);
                MapMat dWm(partial[c].data(), d.Co, K);
                for (std::size_t n = b; n < e; ++n) {
                    im2col(in_ptr + n * in_stride, d, col.data());
                    CMapMat Cm(col.data(), K, P);
                    CMapMat dYm(gout + n * out_stride, d.Co, P);
                    dWm.noalias() += dYm * Cm.transpose();
                }
            });
            MapMat dW(w_impl->grad.data(), d.Co, K);
            for (auto& p : partial) dW += CMapMat(p.data(), d.Co, K);
        }

        if (in_impl->requires_grad) {
            float* gin = in_impl->grad.data();
            parallel_chunks(static_cast<std::size_t>(d.N),
                            [&](std::size_t, std::size_t b, std::size_t e) {
                std::vector<float> dcol(static_cast<std::size_t>(K) * P);
                CMapMat Wm(w_ptr, d.Co, K);
                for (std::size_t n = b; n < e; ++n) {
                    CMapMat dYm(gout + n * out_stride, d.Co, P);
                    MapMat dCm(dcol.data(), K, P);
                    dCm.noalias() = Wm.transpose() * dYm;
                    col2im_acc(dcol.data(), d, gin + n * in_stride);
                }
            });
        }
    });
    return out;
}

Tensor linear(const Tensor& input, const Tensor& weight) {
    if (input.ndim() != 2)
        throw ShapeError("linear: input must be [N,F], got " + shape_str(input.shape()));
    if (weight.ndim() != 2)
        throw ShapeError("linear: weight must be [O,F], got " + shape_str(weight.shape()));
    if (input.dim(1) != weight.dim(1))
        throw ShapeError("linear: inner dimension mismatch: input axis 1 is " +
                         std::to_string(input.dim(1)) + ", weight axis 1 is " +
                         std::to_string(weight.dim(1)));

    const int N = input.dim(0), F = input.dim(1), O = weight.dim(0);
    Tensor out = Tensor::zeros({N, O});
    {
        CMapMat Xm(input.data().data(), N, F);
        CMapMat Wm(weight.data().data(), O, F);
        MapMat Ym(out.data().data(), N, O);
        Ym.noalias() = Xm * Wm.transpose();
    }

    auto in_impl = input.impl();
    auto w_impl = weight.impl();
    auto out_impl = out.impl().get();
    record_node(out, "linear", {input, weight}, [in_impl, w_impl, out_impl, N, F, O]() {
        CMapMat dYm(out_impl->grad.data(), N, O);
        if (w_impl->requires_grad) {
            CMapMat Xm(in_impl->data.data(), N, F);
            MapMat dWm(w_impl->grad.data(), O, F);
            dWm.noalias() += dYm.transpose() * Xm;
        }
        if (in_impl->requires_grad) {
            CMapMat Wm(w_impl->data.data(), O, F);
            MapMat dXm(in_impl->grad.data(), N, F);
            dXm.noalias() += dYm * Wm;
        }
    });
    return out;
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode, float momentum, float eps) {
    if (input.ndim() != 4)
        throw ShapeError("batch_norm: input must be [N,C,H,W], got " + shape_str(input.shape()));
    if (eps <= 0.0f) throw ShapeError("batch_norm: epsilon must be > 0");
    const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (gamma.ndim() != 1 || gamma.dim(0) != C || beta.ndim() != 1 || beta.dim(0) != C)
        throw ShapeError("batch_norm: channel mismatch: input has " + std::to_string(C) +
                         " channels, gamma " + shape_str(gamma.shape()) + ", beta " +
                         shape_str(beta.shape()));
    if (state.running_mean.size() != static_cast<std::size_t>(C) ||
        state.running_var.size() != static_cast<std::size_t>(C))
        throw ShapeError("batch_norm: running stats sized for " +
                         std::to_string(state.running_mean.size()) + " channels, input has " +
                         std::to_string(C));

    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t img = static_cast<std::size_t>(C) * plane;
    const double m = static_cast<double>(N) * plane;

    std::vector<float> mean(C), inv(C);
    if (mode == Mode::Train) {
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = input.data().data() + n * img + c * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            double mu = s / m;
            double v = 0.0;
            for (int n = 0; n < N; ++n) {
                const float* p = input.data().data() + n * img + c * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    double dlt = p[i] - mu;
                    v += dlt * dlt;
                }
            }
            v /= m;
            mean[c] = static_cast<float>(mu);
            inv[c] = static_cast<float>(1.0 / std::sqrt(v + eps));
            state.running_mean[c] = (1.0f - momentum) * state.running_mean[c] +
                                    momentum * static_cast<float>(mu);
            state.running_var[c] = (1.0f - momentum) * state.running_var[c] +
                                   momentum * static_cast<float>(v);
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = state.running_mean[c];
            inv[c] = 1.0f / std::sqrt(state.running_var[c] + eps);
        }
    }

    Tensor out = Tensor::zeros({N, C, H, W});
    const float* g = gamma.data().data();
    const float* b = beta.data().data();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const float* p = input.data().data() + n * img + c * plane;
            float* q = out.data().data() + n * img + c * plane;
            float mu = mean[c], iv = inv[c], gc = g[c], bc = b[c];
            for (std::size_t i = 0; i < plane; ++i) q[i] = gc * (p[i] - mu) * iv + bc;
        }
    }

    auto in_impl = input.impl();
    auto g_impl = gamma.impl();
    auto b_impl = beta.impl();
    auto out_impl = out.impl().get();
    bool train = mode == Mode::Train;
    record_node(out, "batch_norm", {input, gamma, beta},
                [in_impl, g_impl, b_impl, out_impl, mean, inv, N, C, plane, img, m, train]() {
        const float* gout = out_impl->grad.data();
        const float* x = in_impl->data.data();
        const float* g = g_impl->data.data();
        for (int c = 0; c < C; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            float mu = mean[c], iv = inv[c];
            for (int n = 0; n < N; ++n) {
                const float* dy = gout + n * img + c * plane;
                const float* xp = x + n * img + c * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy += dy[i];
                    sum_dy_xhat += dy[i] * (xp[i] - mu) * iv;
                }
            }
            if (g_impl->requires_grad) g_impl->grad[c] += static_cast<float>(sum_dy_xhat);
            if (b_impl->requires_grad) b_impl->grad[c] += static_cast<float>(sum_dy);
            if (in_impl->requires_grad) {
                float gc = g[c];
                float k1 = static_cast<float>(sum_dy / m);
                float k2 = static_cast<float>(sum_dy_xhat / m);
                for (int n = 0; n < N; ++n) {
                    const float* dy = gout + n * img + c * plane;
                    const float* xp = x + n * img + c * plane;
                    float* dx = in_impl->grad.data() + n * img + c * plane;
                    if (train) {
                        for (std::size_t i = 0; i < plane; ++i) {
                            float xhat = (xp[i] - mu) * iv;
                            dx[i] += gc * iv * (dy[i] - k1 - xhat * k2);
                        }
                    } else {
                        for (std::size_t i = 0; i < plane; ++i) dx[i] += gc * iv * dy[i];
                    }
                }
            }
        }
    });
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const float* p = x.data().data();
    float* q = out.data().data();
    for (std::size_t i = 0; i < x.numel(); ++i) q[i] = p[i] > 0.0f ? p[i] : 0.0f;

    auto in_impl = x.impl();
    auto out_impl = out.impl().get();
    record_node(out, "relu", {x}, [in_impl, out_impl]() {
        if (!in_impl->requires_grad) return;
        const float* gout = out_impl->grad.data();
        const float* p = in_impl->data.data();
        float* gin = in_impl->grad.data();
        for (std::size_t i = 0; i < in_impl->data.size(); ++i)
            if (p[i] > 0.0f) gin[i] += gout[i];
    });
    return out;
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride) {
    if (x.ndim() != 4)
        throw ShapeError("max_pool2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
    if (kernel < 1 || stride < 1) throw ShapeError("max_pool2d: kernel and stride must be >= 1");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H < kernel || W < kernel)
        throw ShapeError("max_pool2d: kernel " + std::to_string(kernel) +
                         " larger than spatial extent " + shape_str(x.shape()));
    const int Ho = (H - kernel) / stride + 1;
    const int Wo = (W - kernel) / stride + 1;

    Tensor out = Tensor::zeros({N, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<int>>(out.numel());
    const float* p = x.data().data();
    float* q = out.data().data();
    std::size_t oi = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * H * W;
            for (int ho = 0; ho < Ho; ++ho) {
                for (int wo = 0; wo < Wo; ++wo, ++oi) {
                    int h0 = ho * stride, w0 = wo * stride;
                    float best = p[base + h0 * W + w0];
                    std::size_t besti = base + h0 * W + w0;
                    for (int u = 0; u < kernel; ++u) {
                        for (int v = 0; v < kernel; ++v) {
                            std::size_t idx = base + (h0 + u) * W + (w0 + v);
                            if (p[idx] > best) {
                                best = p[idx];
                                besti = idx;
                            }
                        }
                    }
                    q[oi] = best;
                    (*argmax)[oi] = static_cast<int>(besti);
                }
            }
        }
    }

    auto in_impl = x.impl();
    auto out_impl = out.impl().get();
    record_node(out, "max_pool2d", {x}, [in_impl, out_impl, argmax]() {
        if (!in_impl->requires_grad) return;
        const float* gout = out_impl->grad.data();
        float* gin = in_impl->grad.data();
        for (std::size_t i = 0; i < argmax->size(); ++i) gin[(*argmax)[i]] += gout[i];
    });
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.ndim() != 4)
        throw ShapeError("global_avg_pool: input must be [N,C,H,W], got " + shape_str(x.shape()));
    const int N = x.dim(0), C = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor out = Tensor::zeros({N, C});
    const float* p = x.data().data();
    float* q = out.data().data();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            const float* src = p + (static_cast<std::size_t>(n) * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) s += src[i];
            q[n * C + c] = static_cast<float>(s / static_cast<double>(plane));
        }
    }

    auto in_impl = x.impl();
    auto out_impl = out.impl().get();
    record_node(out, "global_avg_pool", {x}, [in_impl, out_impl, N, C, plane]() {
        if (!in_impl->requires_grad) return;
        const float scale = 1.0f / static_cast<float>(plane);
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                float g = out_impl->grad[n * C + c] * scale;
                float* gin = in_impl->grad.data() + (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) gin[i] += g;
            }
        }
    });
    return out;
}

Tensor flatten(const Tensor& x) {
    if (x.ndim() < 2)
        throw ShapeError("flatten: input must have a batch axis, got " + shape_str(x.shape()));
    const int N = x.dim(0);
    const int F = static_cast<int>(x.numel() / static_cast<std::size_t>(N));
    Tensor out = Tensor::from_data({N, F}, {x.data().begin(), x.data().end()});

    auto in_impl = x.impl();
    auto out_impl = out.impl().get();
    record_node(out, "flatten", {x}, [in_impl, out_impl]() {
        if (!in_impl->requires_grad) return;
        for (std::size_t i = 0; i < in_impl->data.size(); ++i)
            in_impl->grad[i] += out_impl->grad[i];
    });
    return out;
}

Tensor dropout(const Tensor& x, float rate, Mode mode, std::mt19937& rng) {
    if (rate < 0.0f || rate >= 1.0f)
        throw ShapeError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    if (mode == Mode::Eval || rate == 0.0f) {
        Tensor out = x.clone();
        auto in_impl = x.impl();
        auto out_impl = out.impl().get();
        record_node(out, "dropout", {x}, [in_impl, out_impl]() {
            if (!in_impl->requires_grad) return;
            for (std::size_t i = 0; i < in_impl->data.size(); ++i)
                in_impl->grad[i] += out_impl->grad[i];
        });
        return out;
    }

    const float scale = 1.0f / (1.0f - rate);
    auto mask = std::make_shared<std::vector<float>>(x.numel());
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    for (auto& v : *mask) v = uni(rng) < rate ? 0.0f : scale;

    Tensor out = Tensor::zeros(x.shape());
    const float* p = x.data().data();
    float* q = out.data().data();
    for (std::size_t i = 0; i < x.numel(); ++i) q[i] = p[i] * (*mask)[i];

    auto in_impl = x.impl();
    auto out_impl = out.impl().get();
    record_node(out, "dropout", {x}, [in_impl, out_impl, mask]() {
        if (!in_impl->requires_grad) return;
        for (std::size_t i = 0; i < in_impl->data.size(); ++i)
            in_impl->grad[i] += out_impl->grad[i] * (*mask)[i];
    });
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2)
        throw ShapeError("softmax_cross_entropy: logits must be [N,K], got " + shape_str(logits.shape()));
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(N));
    for (int n = 0; n < N; ++n)
        if (labels[n] < 0 || labels[n] >= K)
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(labels[n]) +
                                    " outside class range [0," + std::to_string(K) + ")");

    auto probs = std::make_shared<std::vector<float>>(logits.numel());
    const float* z = logits.data().data();
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const float* row = z + static_cast<std::size_t>(n) * K;
        float mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(static_cast<double>(row[k]) - mx);
        double lse = std::log(sum) + mx;
        total += lse - row[labels[n]];
        float* prow = probs->data() + static_cast<std::size_t>(n) * K;
        for (int k = 0; k < K; ++k)
            prow[k] = static_cast<float>(std::exp(static_cast<double>(row[k]) - lse));
    }
    Tensor out = Tensor::scalar(static_cast<float>(total / N));

    auto in_impl = logits.impl();
    auto out_impl = out.impl().get();
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    record_node(out, "softmax_cross_entropy", {logits},
                [in_impl, out_impl, probs, labels_copy, N, K]() {
        if (!in_impl->requires_grad) return;
        const float g = out_impl->grad[0] / static_cast<float>(N);
        for (int n = 0; n < N; ++n) {
            const float* prow = probs->data() + static_cast<std::size_t>(n) * K;
            float* grow = in_impl->grad.data() + static_cast<std::size_t>(n) * K;
            int y = (*labels_copy)[n];
            for (int k = 0; k < K; ++k) grow[k] += g * (prow[k] - (k == y ? 1.0f : 0.0f));
        }
    });
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = a.at(i) + b.at(i);

    auto ai = a.impl(), bi = b.impl();
    auto out_impl = out.impl().get();
    record_node(out, "add", {a, b}, [ai, bi, out_impl]() {
        if (ai->requires_grad)
            for (std::size_t i = 0; i < ai->data.size(); ++i) ai->grad[i] += out_impl->grad[i];
        if (bi->requires_grad)
            for (std::size_t i = 0; i < bi->data.size(); ++i) bi->grad[i] += out_impl->grad[i];
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.at(i) = a.at(i) * b.at(i);

    auto ai = a.impl(), bi = b.impl();
    auto out_impl = out.impl().get();
    record_node(out, "mul", {a, b}, [ai, bi, out_impl]() {
        if (ai->requires_grad)
            for (std::size_t i = 0; i < ai->data.size(); ++i)
                ai->grad[i] += out_impl->grad[i] * bi->data[i];
        if (bi->requires_grad)
            for (std::size_t i = 0; i < bi->data.size(); ++i)
                bi->grad[i] += out_impl->grad[i] * ai->data[i];
    });
    return out;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x.at(i);
    Tensor out = Tensor::scalar(static_cast<float>(s));

    auto in_impl = x.impl();
    auto out_impl = out.impl().get();
    record_node(out, "sum", {x}, [in_impl, out_impl]() {
        if (!in_impl->requires_grad) return;
        for (std::size_t i = 0; i < in_impl->data.size(); ++i)
            in_impl->grad[i] += out_impl->grad[0];
    });
    return out;
}

SgdOptimizer::SgdOptimizer(std::vector<Tensor> params, float lr, float momentum, float weight_decay)
    : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    velocity_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) velocity_[i].assign(params_[i].numel(), 0.0f);
}

void SgdOptimizer::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        std::span<float> g = p.grad();
        std::span<float> w = p.data();
        std::vector<float>& v = velocity_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            float raw = g[j] + weight_decay_ * w[j];
            v[j] = momentum_ * v[j] + raw;
            w[j] -= lr_ * v[j];
        }
    }
}

void SgdOptimizer::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

}  // namespace gateprune
