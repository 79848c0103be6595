#include "mgcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gemm.hpp"
#include "mgcn/errors.hpp"

namespace mgcn {

AxisGeometry axis_geometry(std::size_t in, std::size_t window, std::size_t stride, Padding padding) {
    if (stride == 0) throw ShapeError("stride must be positive");
    if (window == 0) throw ShapeError("window must be positive");
    if (padding == Padding::valid) {
        if (window > in) {
            throw ShapeError("window " + std::to_string(window) + " larger than input extent " +
                             std::to_string(in));
        }
        return {(in - window) / stride + 1, 0};
    }
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + window;
    const std::size_t total = needed > in ? needed - in : 0;
    return {out, total / 2};
}

std::string_view to_string(Padding padding) { return padding == Padding::same ? "same" : "valid"; }

std::string_view to_string(PoolMode mode) { return mode == PoolMode::max ? "max" : "avg"; }

std::string_view to_string(Activation fn) {
    switch (fn) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::none: break;
    }
    return "none";
}

float sigmoid(float x) {
    constexpr float lo = std::numeric_limits<float>::min();
    constexpr float hi = 1.0f - 0x1p-24f;
    float y;
    if (x >= 0.0f) {
        y = 1.0f / (1.0f + std::exp(-x));
    } else {
        const float e = std::exp(x);
        y = e / (1.0f + e);
    }
    return std::clamp(y, lo, hi);
}

namespace ops {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                         ", got " + shape_to_string(t.shape()));
    }
}

// Columns of the unrolled input per chunk; bounds im2col memory.
constexpr std::size_t kMaxColumnElements = std::size_t{1} << 22;

struct ConvGeometry {
    std::size_t n, c, h, w;
    std::size_t o, kh, kw;
    std::size_t sh, sw;
    AxisGeometry gh, gw;

    std::size_t positions() const { return gh.out * gw.out; }
    std::size_t patch() const { return c * kh * kw; }
};

// col[patch, count*positions] for samples [first, first+count).
void im2col(const ConvGeometry& g, const float* x, std::size_t first, std::size_t count, float* col) {
    const std::size_t oh = g.gh.out, ow = g.gw.out, positions = g.positions();
    const std::size_t row_len = count * positions;
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                float* row = col + ((ci * g.kh + ki) * g.kw + kj) * row_len;
                for (std::size_t s = 0; s < count; ++s) {
                    const float* plane = x + ((first + s) * g.c + ci) * g.h * g.w;
                    float* dst = row + s * positions;
                    for (std::size_t y = 0; y < oh; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * g.sh + ki) -
                                                  static_cast<std::ptrdiff_t>(g.gh.pad_before);
                        float* out = dst + y * ow;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                            std::fill(out, out + ow, 0.0f);
                            continue;
                        }
                        const float* src = plane + static_cast<std::size_t>(iy) * g.w;
                        for (std::size_t xo = 0; xo < ow; ++xo) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xo * g.sw + kj) -
                                                      static_cast<std::ptrdiff_t>(g.gw.pad_before);
                            out[xo] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w))
                                          ? 0.0f
                                          : src[static_cast<std::size_t>(ix)];
                        }
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvGeometry& g, const float* col, std::size_t first, std::size_t count, float* dx) {
    const std::size_t oh = g.gh.out, ow = g.gw.out, positions = g.positions();
    const std::size_t row_len = count * positions;
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        for (std::size_t ki = 0; ki < g.kh; ++ki) {
            for (std::size_t kj = 0; kj < g.kw; ++kj) {
                const float* row = col + ((ci * g.kh + ki) * g.kw + kj) * row_len;
                for (std::size_t s = 0; s < count; ++s) {
                    float* plane = dx + ((first + s) * g.c + ci) * g.h * g.w;
                    const float* src = row + s * positions;
                    for (std::size_t y = 0; y < oh; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * g.sh + ki) -
                                                  static_cast<std::ptrdiff_t>(g.gh.pad_before);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                        float* dst = plane + static_cast<std::size_t>(iy) * g.w;
                        for (std::size_t xo = 0; xo < ow; ++xo) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xo * g.sw + kj) -
                                                      static_cast<std::ptrdiff_t>(g.gw.pad_before);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                            dst[static_cast<std::size_t>(ix)] += src[y * ow + xo];
                        }
                    }
                }
            }
        }
    }
}

std::size_t chunk_samples(const ConvGeometry& g) {
    const std::size_t per_sample = g.patch() * g.positions();
    return std::max<std::size_t>(1, std::min(g.n, kMaxColumnElements / std::max<std::size_t>(1, per_sample)));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, Extent2 stride,
              Padding padding, GradTape* tape) {
    require_rank(input, 4, "conv2d", "input");
    require_rank(kernels, 4, "conv2d", "kernels");
    require_rank(bias, 1, "conv2d", "bias");
    if (stride.h == 0 || stride.w == 0) throw ShapeError("conv2d: stride must be positive");
    ConvGeometry g{};
    g.n = input.dim(0);
    g.c = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.o = kernels.dim(0);
    g.kh = kernels.dim(2);
    g.kw = kernels.dim(3);
    g.sh = stride.h;
    g.sw = stride.w;
    if (kernels.dim(1) != g.c) {
        throw ShapeError("conv2d: input has " + std::to_string(g.c) + " channels but kernels expect " +
                         std::to_string(kernels.dim(1)));
    }
    if (bias.dim(0) != g.o) {
        throw ShapeError("conv2d: bias length " + std::to_string(bias.dim(0)) + " != filters " +
                         std::to_string(g.o));
    }
    g.gh = axis_geometry(g.h, g.kh, g.sh, padding);
    g.gw = axis_geometry(g.w, g.kw, g.sw, padding);

    const std::size_t positions = g.positions();
    const std::size_t patch = g.patch();
    const std::size_t chunk = chunk_samples(g);

    Tensor out(Shape{g.n, g.o, g.gh.out, g.gw.out});
    {
        auto y = out.mutable_data();
        const float* x = input.data().data();
        const float* k = kernels.data().data();
        const float* b = bias.data().data();
        std::vector<float> col(patch * chunk * positions);
        std::vector<float> res(g.o * chunk * positions);
        for (std::size_t first = 0; first < g.n; first += chunk) {
            const std::size_t count = std::min(chunk, g.n - first);
            const std::size_t cols = count * positions;
            im2col(g, x, first, count, col.data());
            detail::gemm(g.o, cols, patch, k, col.data(), res.data(), false);
            for (std::size_t s = 0; s < count; ++s) {
                for (std::size_t oc = 0; oc < g.o; ++oc) {
                    const float* src = res.data() + oc * cols + s * positions;
                    float* dst = y.data() + ((first + s) * g.o + oc) * positions;
                    for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p] + b[oc];
                }
            }
        }
    }

    GradTape::record(tape, {input, kernels, bias}, out,
                     [input, kernels, bias, g, chunk](const Tensor& output) {
        Tensor in = input, ker = kernels, bs = bias;
        const std::size_t positions = g.positions();
        const std::size_t patch = g.patch();
        const float* gy = output.grad().data();

        if (bs.requires_grad()) {
            auto gb = bs.mutable_grad();
            for (std::size_t s = 0; s < g.n; ++s) {
                for (std::size_t oc = 0; oc < g.o; ++oc) {
                    const float* src = gy + (s * g.o + oc) * positions;
                    float acc = 0.0f;
                    for (std::size_t p = 0; p < positions; ++p) acc += src[p];
                    gb[oc] += acc;
                }
            }
        }
        if (!in.requires_grad() && !ker.requires_grad()) return;

        std::vector<float> col(patch * chunk * positions);
        std::vector<float> gmat(g.o * chunk * positions);
        std::vector<float> scratch;
        std::vector<float> kt;
        if (in.requires_grad()) {
            kt.resize(patch * g.o);
            detail::transpose(g.o, patch, ker.data().data(), kt.data());
        }
        for (std::size_t first = 0; first < g.n; first += chunk) {
            const std::size_t count = std::min(chunk, g.n - first);
            const std::size_t cols = count * positions;
            for (std::size_t oc = 0; oc < g.o; ++oc) {
                for (std::size_t s = 0; s < count; ++s) {
                    const float* src = gy + ((first + s) * g.o + oc) * positions;
                    std::copy(src, src + positions, gmat.data() + oc * cols + s * positions);
                }
            }
            if (ker.requires_grad()) {
                im2col(g, in.data().data(), first, count, col.data());
                scratch.resize(cols * patch);
                detail::transpose(patch, cols, col.data(), scratch.data());
                detail::gemm(g.o, patch, cols, gmat.data(), scratch.data(), ker.mutable_grad().data(), true);
            }
            if (in.requires_grad()) {
                detail::gemm(patch, cols, g.o, kt.data(), gmat.data(), col.data(), false);
                col2im_add(g, col.data(), first, count, in.mutable_grad().data());
            }
        }
    });
    return out;
}

Tensor pool2d(const Tensor& input, PoolMode mode, Extent2 window, Extent2 stride, Padding padding,
              GradTape* tape) {
    require_rank(input, 4, "pool2d", "input");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const AxisGeometry gh = axis_geometry(h, window.h, stride.h, padding);
    const AxisGeometry gw = axis_geometry(w, window.w, stride.w, padding);
    const std::size_t oh = gh.out, ow = gw.out;

    Tensor out(Shape{n, c, oh, ow});
    auto y = out.mutable_data();
    const auto x = input.data();
    // Max: flat input index of the winner. Avg: number of in-bounds cells.
    std::vector<std::size_t> aux(out.size());

    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const std::size_t base = plane * h * w;
        for (std::size_t i = 0; i < oh; ++i) {
            const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(i * stride.h) - static_cast<std::ptrdiff_t>(gh.pad_before);
            const std::size_t ys = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
            const std::size_t ye = static_cast<std::size_t>(std::min<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(window.h), static_cast<std::ptrdiff_t>(h)));
            for (std::size_t j = 0; j < ow; ++j) {
                const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(j * stride.w) - static_cast<std::ptrdiff_t>(gw.pad_before);
                const std::size_t xs = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
                const std::size_t xe = static_cast<std::size_t>(std::min<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(window.w), static_cast<std::ptrdiff_t>(w)));
                const std::size_t o = (plane * oh + i) * ow + j;
                if (mode == PoolMode::max) {
                    std::size_t best = base + ys * w + xs;
                    for (std::size_t yy = ys; yy < ye; ++yy) {
                        for (std::size_t xx = xs; xx < xe; ++xx) {
                            const std::size_t idx = base + yy * w + xx;
                            if (x[idx] > x[best]) best = idx;
                        }
                    }
                    y[o] = x[best];
                    aux[o] = best;
                } else {
                    float acc = 0.0f;
                    for (std::size_t yy = ys; yy < ye; ++yy) {
                        for (std::size_t xx = xs; xx < xe; ++xx) acc += x[base + yy * w + xx];
                    }
                    const std::size_t count = (ye - ys) * (xe - xs);
                    y[o] = acc / static_cast<float>(count);
                    aux[o] = count;
                }
            }
        }
    }

    GradTape::record(tape, {input}, out,
                     [input, mode, window, stride, gh, gw, h, w, aux = std::move(aux)](const Tensor& output) {
        Tensor in = input;
        auto gx = in.mutable_grad();
        const auto gy = output.grad();
        if (mode == PoolMode::max) {
            for (std::size_t o = 0; o < gy.size(); ++o) gx[aux[o]] += gy[o];
            return;
        }
        const std::size_t oh = gh.out, ow = gw.out;
        const std::size_t planes = gy.size() / (oh * ow);
        for (std::size_t plane = 0; plane < planes; ++plane) {
            const std::size_t base = plane * h * w;
            for (std::size_t i = 0; i < oh; ++i) {
                const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(i * stride.h) - static_cast<std::ptrdiff_t>(gh.pad_before);
                const std::size_t ys = static_cast<std::size_t>(std::max<std::ptrdiff_t>(y0, 0));
                const std::size_t ye = static_cast<std::size_t>(std::min<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(window.h), static_cast<std::ptrdiff_t>(h)));
                for (std::size_t j = 0; j < ow; ++j) {
                    const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(j * stride.w) - static_cast<std::ptrdiff_t>(gw.pad_before);
                    const std::size_t xs = static_cast<std::size_t>(std::max<std::ptrdiff_t>(x0, 0));
                    const std::size_t xe = static_cast<std::size_t>(std::min<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(window.w), static_cast<std::ptrdiff_t>(w)));
                    const std::size_t o = (plane * oh + i) * ow + j;
                    const float share = gy[o] / static_cast<float>(aux[o]);
                    for (std::size_t yy = ys; yy < ye; ++yy) {
                        for (std::size_t xx = xs; xx < xe; ++xx) gx[base + yy * w + xx] += share;
                    }
                }
            }
        }
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b, GradTape* tape) {
    require_rank(a, 2, "matmul", "left operand");
    require_rank(b, 2, "matmul", "right operand");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: dimension mismatch " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
    }
    Tensor out(Shape{m, n});
    detail::gemm(m, n, k, a.data().data(), b.data().data(), out.mutable_data().data(), false);

    GradTape::record(tape, {a, b}, out, [a, b, m, k, n](const Tensor& output) {
        Tensor lhs = a, rhs = b;
        const float* gy = output.grad().data();
        if (lhs.requires_grad()) {
            std::vector<float> bt(n * k);
            detail::transpose(k, n, rhs.data().data(), bt.data());
            detail::gemm(m, k, n, gy, bt.data(), lhs.mutable_grad().data(), true);
        }
        if (rhs.requires_grad()) {
            std::vector<float> at(k * m);
            detail::transpose(m, k, lhs.data().data(), at.data());
            detail::gemm(k, n, m, at.data(), gy, rhs.mutable_grad().data(), true);
        }
    });
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias, GradTape* tape) {
    require_rank(x, 2, "add_bias", "input");
    require_rank(bias, 1, "add_bias", "bias");
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    if (bias.dim(0) != cols) {
        throw ShapeError("add_bias: bias length " + std::to_string(bias.dim(0)) + " != features " +
                         std::to_string(cols));
    }
    Tensor out(x.shape());
    auto y = out.mutable_data();
    const auto xv = x.data();
    const auto bv = bias.data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t col = 0; col < cols; ++col) y[r * cols + col] = xv[r * cols + col] + bv[col];
    }
    GradTape::record(tape, {x, bias}, out, [x, bias, rows, cols](const Tensor& output) {
        Tensor in = x, b = bias;
        const auto gy = output.grad();
        if (in.requires_grad()) {
            auto gx = in.mutable_grad();
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
        }
        if (b.requires_grad()) {
            auto gb = b.mutable_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t col = 0; col < cols; ++col) gb[col] += gy[r * cols + col];
            }
        }
    });
    return out;
}

Tensor activate(const Tensor& input, Activation fn, GradTape* tape) {
    if (fn == Activation::none) return input;
    Tensor out(input.shape());
    auto y = out.mutable_data();
    const auto x = input.data();
    if (fn == Activation::relu) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    }
    GradTape::record(tape, {input}, out, [input, fn, out](const Tensor& output) {
        Tensor in = input;
        auto gx = in.mutable_grad();
        const auto gy = output.grad();
        const auto x = in.data();
        const auto yv = out.data();
        if (fn == Activation::relu) {
            for (std::size_t i = 0; i < gy.size(); ++i) {
                if (x[i] > 0.0f) gx[i] += gy[i];
            }
        } else {
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0f - yv[i]);
        }
    });
    return out;
}

Tensor concat(std::span<const Tensor> inputs, std::size_t axis, GradTape* tape) {
    if (inputs.empty()) throw ShapeError("concat: empty input list");
    const Shape& first = inputs.front().shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_to_string(first));
    Shape shape = first;
    shape[axis] = 0;
    for (const Tensor& t : inputs) {
        const Shape& s = t.shape();
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
        if (!ok) {
            throw ShapeError("concat: " + shape_to_string(s) + " disagrees with " + shape_to_string(first) +
                             " off axis " + std::to_string(axis));
        }
        shape[axis] += s[axis];
    }
    const std::size_t outer = std::accumulate(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(axis),
                                              std::size_t{1}, std::multiplies<>());
    const std::size_t inner = std::accumulate(first.begin() + static_cast<std::ptrdiff_t>(axis) + 1, first.end(),
                                              std::size_t{1}, std::multiplies<>());
    const std::size_t out_row = shape[axis] * inner;

    Tensor out(shape);
    auto y = out.mutable_data();
    std::size_t offset = 0;
    for (const Tensor& t : inputs) {
        const std::size_t row = t.dim(axis) * inner;
        const auto x = t.data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(x.data() + o * row, row, y.data() + o * out_row + offset);
        }
        offset += row;
    }

    std::vector<Tensor> parts(inputs.begin(), inputs.end());
    GradTape::record(tape, parts, out, [parts, axis, outer, inner, out_row](const Tensor& output) {
        const auto gy = output.grad();
        std::size_t offset = 0;
        for (Tensor t : parts) {
            const std::size_t row = t.dim(axis) * inner;
            if (t.requires_grad()) {
                auto gx = t.mutable_grad();
                for (std::size_t o = 0; o < outer; ++o) {
                    const float* src = gy.data() + o * out_row + offset;
                    float* dst = gx.data() + o * row;
                    for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
                }
            }
            offset += row;
        }
    });
    return out;
}

Tensor reshape(const Tensor& input, Shape shape, GradTape* tape) {
    if (shape_size(shape) != input.size()) {
        throw ShapeError("reshape: cannot view " + shape_to_string(input.shape()) + " as " + shape_to_string(shape));
    }
    Tensor out(std::move(shape), std::vector<float>(input.data().begin(), input.data().end()));
    GradTape::record(tape, {input}, out, [input](const Tensor& output) {
        Tensor in = input;
        auto gx = in.mutable_grad();
        const auto gy = output.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
    return out;
}

Tensor flatten(const Tensor& input, GradTape* tape) {
    if (input.rank() < 1) throw ShapeError("flatten: rank-0 input");
    const std::size_t n = input.dim(0);
    return reshape(input, Shape{n, input.size() / n}, tape);
}

Tensor global_avg_pool(const Tensor& input, GradTape* tape) {
    require_rank(input, 4, "global_avg_pool", "input");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    Tensor out(Shape{n, c});
    auto y = out.mutable_data();
    const auto x = input.data();
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        float acc = 0.0f;
        for (std::size_t p = 0; p < hw; ++p) acc += x[plane * hw + p];
        y[plane] = acc / static_cast<float>(hw);
    }
    GradTape::record(tape, {input}, out, [input, hw](const Tensor& output) {
        Tensor in = input;
        auto gx = in.mutable_grad();
        const auto gy = output.grad();
        for (std::size_t plane = 0; plane < gy.size(); ++plane) {
            const float share = gy[plane] / static_cast<float>(hw);
            for (std::size_t p = 0; p < hw; ++p) gx[plane * hw + p] += share;
        }
    });
    return out;
}

namespace {

struct ChannelLayout {
    std::size_t n, c, spatial;
};

ChannelLayout channel_layout(const Tensor& x, const char* op) {
    if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)};
    if (x.rank() == 2) return {x.dim(0), x.dim(1), 1};
    throw ShapeError(std::string(op) + ": expected rank 2 or 4 input, got " + shape_to_string(x.shape()));
}

void require_channel_vector(const Tensor& t, std::size_t c, const char* op, const char* what) {
    if (t.rank() != 1 || t.dim(0) != c) {
        throw ShapeError(std::string(op) + ": " + what + " must have shape (" + std::to_string(c) + "), got " +
                         shape_to_string(t.shape()));
    }
}

}  // namespace

Tensor batch_norm_train(const Tensor& input, const Tensor& gamma, const Tensor& beta, float epsilon,
                        GradTape* tape, BatchMoments* moments) {
    const ChannelLayout L = channel_layout(input, "batch_norm");
    require_channel_vector(gamma, L.c, "batch_norm", "gamma");
    require_channel_vector(beta, L.c, "batch_norm", "beta");
    const std::size_t count = L.n * L.spatial;
    const auto x = input.data();
    const auto gm = gamma.data();
    const auto bt = beta.data();

    std::vector<float> mean(L.c), var(L.c), inv_std(L.c);
    for (std::size_t ch = 0; ch < L.c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < L.n; ++i) {
            const float* p = x.data() + (i * L.c + ch) * L.spatial;
            for (std::size_t k = 0; k < L.spatial; ++k) s += p[k];
        }
        const double mu = s / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i = 0; i < L.n; ++i) {
            const float* p = x.data() + (i * L.c + ch) * L.spatial;
            for (std::size_t k = 0; k < L.spatial; ++k) {
                const double d = p[k] - mu;
                ss += d * d;
            }
        }
        const double v = ss / static_cast<double>(count);
        mean[ch] = static_cast<float>(mu);
        var[ch] = static_cast<float>(v);
        inv_std[ch] = static_cast<float>(1.0 / std::sqrt(v + epsilon));
    }

    Tensor out(input.shape());
    Tensor normalized(input.shape());
    auto y = out.mutable_data();
    auto xh = normalized.mutable_data();
    for (std::size_t i = 0; i < L.n; ++i) {
        for (std::size_t ch = 0; ch < L.c; ++ch) {
            const std::size_t base = (i * L.c + ch) * L.spatial;
            for (std::size_t k = 0; k < L.spatial; ++k) {
                const float v = (x[base + k] - mean[ch]) * inv_std[ch];
                xh[base + k] = v;
                y[base + k] = gm[ch] * v + bt[ch];
            }
        }
    }
    if (moments) *moments = BatchMoments{mean, var};

    GradTape::record(tape, {input, gamma, beta}, out,
                     [input, gamma, beta, normalized, inv_std, L](const Tensor& output) {
        Tensor in = input, g = gamma, b = beta;
        const auto gy = output.grad();
        const auto xh = normalized.data();
        const auto gm = g.data();
        const double count = static_cast<double>(L.n * L.spatial);
        for (std::size_t ch = 0; ch < L.c; ++ch) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t i = 0; i < L.n; ++i) {
                const std::size_t base = (i * L.c + ch) * L.spatial;
                for (std::size_t k = 0; k < L.spatial; ++k) {
                    sum_g += gy[base + k];
                    sum_gx += static_cast<double>(gy[base + k]) * xh[base + k];
                }
            }
            if (g.requires_grad()) g.mutable_grad()[ch] += static_cast<float>(sum_gx);
            if (b.requires_grad()) b.mutable_grad()[ch] += static_cast<float>(sum_g);
            if (!in.requires_grad()) continue;
            auto gx = in.mutable_grad();
            const double scale = static_cast<double>(gm[ch]) * inv_std[ch] / count;
            for (std::size_t i = 0; i < L.n; ++i) {
                const std::size_t base = (i * L.c + ch) * L.spatial;
                for (std::size_t k = 0; k < L.spatial; ++k) {
                    const double v = count * gy[base + k] - sum_g - xh[base + k] * sum_gx;
                    gx[base + k] += static_cast<float>(scale * v);
                }
            }
        }
    });
    return out;
}

Tensor batch_norm_inference(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                            const Tensor& mean, const Tensor& variance, float epsilon, GradTape* tape) {
    const ChannelLayout L = channel_layout(input, "batch_norm");
    require_channel_vector(gamma, L.c, "batch_norm", "gamma");
    require_channel_vector(beta, L.c, "batch_norm", "beta");
    require_channel_vector(mean, L.c, "batch_norm", "moving mean");
    require_channel_vector(variance, L.c, "batch_norm", "moving variance");
    std::vector<float> inv_std(L.c);
    for (std::size_t ch = 0; ch < L.c; ++ch) {
        inv_std[ch] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(variance[ch]) + epsilon));
    }
    Tensor out(input.shape());
    auto y = out.mutable_data();
    const auto x = input.data();
    for (std::size_t i = 0; i < L.n; ++i) {
        for (std::size_t ch = 0; ch < L.c; ++ch) {
            const std::size_t base = (i * L.c + ch) * L.spatial;
            for (std::size_t k = 0; k < L.spatial; ++k) {
                y[base + k] = gamma[ch] * ((x[base + k] - mean[ch]) * inv_std[ch]) + beta[ch];
            }
        }
    }
    GradTape::record(tape, {input, gamma, beta}, out,
                     [input, gamma, beta, mean, inv_std, L](const Tensor& output) {
        Tensor in = input, g = gamma, b = beta;
        const auto gy = output.grad();
        const auto x = in.data();
        for (std::size_t ch = 0; ch < L.c; ++ch) {
            float sum_g = 0.0f, sum_gx = 0.0f;
            const float scale = g[ch] * inv_std[ch];
            for (std::size_t i = 0; i < L.n; ++i) {
                const std::size_t base = (i * L.c + ch) * L.spatial;
                for (std::size_t k = 0; k < L.spatial; ++k) {
                    sum_g += gy[base + k];
                    sum_gx += gy[base + k] * ((x[base + k] - mean[ch]) * inv_std[ch]);
                    if (in.requires_grad()) in.mutable_grad()[base + k] += gy[base + k] * scale;
                }
            }
            if (g.requires_grad()) g.mutable_grad()[ch] += sum_gx;
            if (b.requires_grad()) b.mutable_grad()[ch] += sum_g;
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b, GradTape* tape) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shapes differ " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
    }
    Tensor out(a.shape());
    auto y = out.mutable_data();
    const auto av = a.data();
    const auto bv = b.data();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    GradTape::record(tape, {a, b}, out, [a, b](const Tensor& output) {
        Tensor lhs = a, rhs = b;
        const auto gy = output.grad();
        if (lhs.requires_grad()) {
            auto g = lhs.mutable_grad();
            const auto other = rhs.data();
            for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * other[i];
        }
        if (rhs.requires_grad()) {
            auto g = rhs.mutable_grad();
            const auto other = lhs.data();
            for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * other[i];
        }
    });
    return out;
}

Tensor sum(const Tensor& input, GradTape* tape) {
    double acc = 0.0;
    for (float v : input.data()) acc += v;
    Tensor out = Tensor::scalar(static_cast<float>(acc));
    GradTape::record(tape, {input}, out, [input](const Tensor& output) {
        Tensor in = input;
        const float g = output.grad()[0];
        for (float& v : in.mutable_grad()) v += g;
    });
    return out;
}

}  // namespace ops
}  // namespace mgcn
