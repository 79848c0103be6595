#include "mgcn/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>

#include "mgcn/errors.hpp"
#include "mgcn/layers.hpp"
#include "mgcn/ops.hpp"
#include "mgcn/random.hpp"
#include "mgcn/trainer.hpp"

namespace mgcn {

namespace {

constexpr std::size_t kMaxElements = 64;

constexpr std::array<std::string_view, 13> kOps = {
    "conv2d",  "max_pool",   "avg_pool",   "dense",   "flatten",         "batch_norm", "dropout_eval",
    "concat",  "relu",       "sigmoid",    "global_avg_pool", "bce_sigmoid", "matmul",
};

using OpFn = std::function<Tensor(const std::vector<Tensor>&, GradTape*)>;

struct Case {
    std::vector<Tensor> inputs;
    std::vector<bool> checked;
    OpFn fn;
    bool scalar_loss = false;
};

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::size_t pick(std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
    }
    bool coin() { return (rng_() >> 63) != 0; }
    float uniform(float lo, float hi) {
        return lo + (hi - lo) * static_cast<float>(rng_() >> 40) * 0x1p-24f;
    }

    Tensor tensor(Shape shape, float lo = -1.0f, float hi = 1.0f) {
        Tensor t(std::move(shape));
        for (float& v : t.mutable_data()) v = uniform(lo, hi);
        return t;
    }

    /// Values at least `gap` apart, so no perturbation reorders them.
    Tensor distinct(Shape shape, float gap) {
        Tensor t(std::move(shape));
        auto d = t.mutable_data();
        std::vector<std::size_t> order(d.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng_);
        for (std::size_t i = 0; i < d.size(); ++i) d[order[i]] = (static_cast<float>(i) - d.size() / 2.0f) * gap;
        return t;
    }

    /// Uniform in [-hi, hi] but never within `margin` of zero.
    Tensor away_from_zero(Shape shape, float hi, float margin) {
        Tensor t(std::move(shape));
        for (float& v : t.mutable_data()) {
            do v = uniform(-hi, hi);
            while (std::fabs(v) < margin);
        }
        return t;
    }

    Shape nchw(std::size_t max_hw) {
        Shape s{pick(1, 2), pick(1, 2), pick(2, max_hw), pick(2, max_hw)};
        while (shape_size(s) > kMaxElements) s[0] > 1 ? --s[0] : --s[2];
        return s;
    }

    Padding padding() { return coin() ? Padding::same : Padding::valid; }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

Case single(Tensor x, OpFn fn) { return Case{{std::move(x)}, {true}, std::move(fn)}; }

Case pool_case(Gen& g, PoolMode mode) {
    const Shape s = g.nchw(5);
    const Extent2 window{g.pick(1, std::min<std::size_t>(3, s[2])), g.pick(1, std::min<std::size_t>(3, s[3]))};
    const Extent2 stride{g.pick(1, 2), g.pick(1, 2)};
    const Padding pad = g.padding();
    Tensor x = mode == PoolMode::max ? g.distinct(s, 0.05f) : g.tensor(s);
    return single(x, [=](const std::vector<Tensor>& in, GradTape* t) {
        return ops::pool2d(in[0], mode, window, stride, pad, t);
    });
}

Case make_case(std::string_view op, Gen& g) {
    if (op == "conv2d") {
        Shape s = g.nchw(5);
        const std::size_t out_ch = g.pick(1, 2);
        const Extent2 k{g.pick(1, std::min<std::size_t>(3, s[2])), g.pick(1, std::min<std::size_t>(3, s[3]))};
        const Extent2 stride{g.pick(1, 2), g.pick(1, 2)};
        const Padding pad = g.padding();
        return Case{{g.tensor(s), g.tensor({out_ch, s[1], k.h, k.w}), g.tensor({out_ch})},
                    {true, true, true},
                    [=](const std::vector<Tensor>& in, GradTape* t) {
                        return ops::conv2d(in[0], in[1], in[2], stride, pad, t);
                    }};
    }
    if (op == "max_pool") return pool_case(g, PoolMode::max);
    if (op == "avg_pool") return pool_case(g, PoolMode::avg);
    if (op == "dense" || op == "matmul") {
        const std::size_t n = g.pick(1, 3), f = g.pick(1, 8), u = g.pick(1, 4);
        if (op == "matmul") {
            return Case{{g.tensor({n, f}), g.tensor({f, u})}, {true, true},
                        [](const std::vector<Tensor>& in, GradTape* t) { return ops::matmul(in[0], in[1], t); }};
        }
        return Case{{g.tensor({n, f}), g.tensor({f, u}), g.tensor({u})},
                    {true, true, true},
                    [](const std::vector<Tensor>& in, GradTape* t) {
                        return ops::add_bias(ops::matmul(in[0], in[1], t), in[2], t);
                    }};
    }
    if (op == "flatten") {
        return single(g.tensor(g.nchw(4)),
                      [](const std::vector<Tensor>& in, GradTape* t) { return ops::flatten(in[0], t); });
    }
    if (op == "batch_norm") {
        const std::size_t c = g.pick(1, 3);
        Shape s = g.coin() ? Shape{g.pick(4, 8), c} : Shape{g.pick(2, 3), c, g.pick(1, 3), g.pick(2, 3)};
        return Case{{g.tensor(s), g.tensor({c}, 0.5f, 1.5f), g.tensor({c}, -0.5f, 0.5f)},
                    {true, true, true},
                    [](const std::vector<Tensor>& in, GradTape* t) {
                        return ops::batch_norm_train(in[0], in[1], in[2], kBatchNormEpsilon, t);
                    }};
    }
    if (op == "dropout_eval") {
        const Shape s = g.nchw(4);
        const LayerSpec spec = layer::dropout(g.uniform(0.1f, 0.9f));
        auto state = std::make_shared<LayerState>(init_params(spec, Shape(s.begin() + 1, s.end()), g.engine()()));
        set_mode(*state, Mode::eval);
        return single(g.tensor(s), [spec, state](const std::vector<Tensor>& in, GradTape* t) {
            return forward(spec, *state, in[0], t);
        });
    }
    if (op == "concat") {
        const std::size_t parts = g.pick(2, 3);
        const bool spatial = g.coin();
        const std::size_t n = g.pick(1, 2), h = g.pick(1, 3), w = g.pick(1, 3);
        Case c;
        for (std::size_t i = 0; i < parts; ++i) {
            const std::size_t ch = g.pick(1, 3);
            c.inputs.push_back(g.tensor(spatial ? Shape{n, ch, h, w} : Shape{n, ch}));
            c.checked.push_back(true);
        }
        c.fn = [](const std::vector<Tensor>& in, GradTape* t) { return ops::concat(in, 1, t); };
        return c;
    }
    if (op == "relu") {
        return single(g.away_from_zero(g.nchw(4), 1.0f, 0.01f), [](const std::vector<Tensor>& in, GradTape* t) {
            return ops::activate(in[0], Activation::relu, t);
        });
    }
    if (op == "sigmoid") {
        return single(g.tensor(g.nchw(4), -4.0f, 4.0f), [](const std::vector<Tensor>& in, GradTape* t) {
            return ops::activate(in[0], Activation::sigmoid, t);
        });
    }
    if (op == "global_avg_pool") {
        return single(g.tensor(g.nchw(4)),
                      [](const std::vector<Tensor>& in, GradTape* t) { return ops::global_avg_pool(in[0], t); });
    }
    if (op == "bce_sigmoid") {
        const std::size_t n = g.pick(1, 16);
        Tensor labels({n});
        for (float& v : labels.mutable_data()) v = g.coin() ? 1.0f : 0.0f;
        Case c{{g.tensor({n}, -3.0f, 3.0f), labels}, {true, false}, [](const std::vector<Tensor>& in, GradTape* t) {
                   return bce_loss(ops::activate(in[0], Activation::sigmoid, t), in[1], t);
               }};
        c.scalar_loss = true;
        return c;
    }
    throw ConfigError("gradient check: unknown op '" + std::string(op) + "'");
}

double weighted_sum(const Tensor& out, const Tensor& weights) {
    double total = 0.0;
    const auto o = out.data();
    const auto w = weights.data();
    for (std::size_t i = 0; i < o.size(); ++i) total += static_cast<double>(o[i]) * static_cast<double>(w[i]);
    return total;
}

void run_trial(const std::string_view op, Gen& g, const GradCheckOptions& opts, OpCheck& result) {
    Case c = make_case(op, g);
    const Tensor probe = c.fn(c.inputs, nullptr);
    const Tensor weights = c.scalar_loss ? Tensor(probe.shape(), 1.0f) : g.tensor(probe.shape());

    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
        if (c.checked[i]) c.inputs[i].set_trainable(true);
    }
    {
        GradTape tape;
        const Tensor out = c.fn(c.inputs, &tape);
        const Tensor loss = c.scalar_loss ? out : ops::sum(ops::mul(out, weights, &tape), &tape);
        tape.backward(loss);
    }

    const bool flip = opts.inject_sign_flip == op;
    const float h = static_cast<float>(opts.step);
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
        if (!c.checked[i]) continue;
        Tensor x = c.inputs[i];
        const std::vector<float> analytic = x.has_grad() ? std::vector<float>(x.grad().begin(), x.grad().end())
                                                         : std::vector<float>(x.size(), 0.0f);
        auto d = x.mutable_data();
        for (std::size_t j = 0; j < d.size(); ++j) {
            const float v = d[j];
            const float up = v + h, down = v - h;
            d[j] = up;
            const double l_up = weighted_sum(c.fn(c.inputs, nullptr), weights);
            d[j] = down;
            const double l_down = weighted_sum(c.fn(c.inputs, nullptr), weights);
            d[j] = v;
            const double numeric = (l_up - l_down) / (static_cast<double>(up) - static_cast<double>(down));
            const double a = flip ? -static_cast<double>(analytic[j]) : static_cast<double>(analytic[j]);
            const double err = std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
            result.max_rel_error = std::max(result.max_rel_error, err);
            ++result.elements;
        }
    }
    ++result.trials;
}

}  // namespace

std::span<const std::string_view> gradcheck_ops() { return kOps; }

bool GradCheckReport::passed() const {
    return std::all_of(ops.begin(), ops.end(), [](const OpCheck& c) { return c.passed; });
}

GradCheckReport run_gradient_checks(const GradCheckOptions& opts) {
    if (opts.trials == 0) throw ConfigError("gradient check needs at least one trial");
    if (!(opts.step > 0.0)) throw ConfigError("gradient check step must be positive");
    for (const auto& name : opts.only) {
        if (std::find(kOps.begin(), kOps.end(), name) == kOps.end()) {
            throw ConfigError("gradient check: unknown op '" + name + "'");
        }
    }
    GradCheckReport report;
    for (std::size_t k = 0; k < kOps.size(); ++k) {
        const std::string_view op = kOps[k];
        if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), op) == opts.only.end()) continue;
        OpCheck result;
        result.op = std::string(op);
        for (std::size_t t = 0; t < opts.trials; ++t) {
            Gen g(mix_seed(mix_seed(opts.seed, k), t));
            run_trial(op, g, opts, result);
        }
        result.passed = result.max_rel_error < opts.tolerance;
        report.ops.push_back(std::move(result));
    }
    return report;
}

}  // namespace mgcn
