#include "walkback/net.hpp"

#include <algorithm>
#include <cmath>

#include "walkback/kernels.hpp"

namespace walkback {

namespace {
constexpr double kLeakySlope = 0.01;
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softplus: return "softplus";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "leaky_relu") return Activation::leaky_relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "softplus") return Activation::softplus;
    throw ConfigError("unknown activation '" + name + "'");
}

double softplus(double x) {
    // log(1 + e^x) without overflow on either tail.
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::leaky_relu: return x > 0.0 ? x : kLeakySlope * x;
        case Activation::tanh: return std::tanh(x);
        case Activation::sigmoid: return logistic(x);
        case Activation::softplus: return softplus(x);
    }
    return x;
}

double activation_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::leaky_relu: return pre > 0.0 ? 1.0 : kLeakySlope;
        case Activation::tanh: return 1.0 - post * post;
        case Activation::sigmoid: return post * (1.0 - post);
        case Activation::softplus: return logistic(pre);
    }
    return 1.0;
}

ParamNet ParamNet::mlp(const std::vector<std::size_t>& sizes, Activation hidden,
                       Activation output, std::size_t per_step_count, Rng& rng) {
    if (sizes.size() < 2) throw ConfigError("mlp: need at least input and output widths");
    std::vector<Layer> layers;
    layers.reserve(sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        layer.w = Mat(sizes[l + 1], sizes[l]);
        layer.b = Vec(sizes[l + 1], 0.0);
        layer.act = (l + 2 == sizes.size()) ? output : hidden;
        const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
        for (double& w : layer.w.v) w = (2.0 * rng.uniform() - 1.0) * bound;
        layers.push_back(std::move(layer));
    }
    return from_layers(std::move(layers), per_step_count);
}

ParamNet ParamNet::from_layers(std::vector<Layer> layers, std::size_t per_step_count) {
    if (layers.empty()) throw ConfigError("net: needs at least one layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].w.rows == 0 || layers[l].w.cols == 0)
            throw ConfigError("net: empty layer " + std::to_string(l));
        if (layers[l].b.size() != layers[l].w.rows)
            throw ConfigError("net: bias width mismatch at layer " + std::to_string(l));
        if (l > 0 && layers[l].w.cols != layers[l - 1].w.rows)
            throw ConfigError("net: layer " + std::to_string(l) +
                              " input width does not match previous output width");
    }
    ParamNet net;
    net.layers_ = std::move(layers);
    const std::size_t out = net.layers_.back().w.rows;
    net.per_step_.assign(per_step_count, StepAffine{Vec(out, 1.0), Vec(out, 0.0)});
    net.init_buffers();
    return net;
}

void ParamNet::init_buffers() {
    gw_.clear();
    gb_.clear();
    for (const Layer& l : layers_) {
        gw_.emplace_back(l.w.rows, l.w.cols);
        gb_.emplace_back(l.b.size(), 0.0);
    }
    gstep_.assign(per_step_.size(),
                  StepAffine{Vec(output_dim(), 0.0), Vec(output_dim(), 0.0)});
    adam_m_.clear();
    adam_v_.clear();
    adam_t_ = 0;
}

std::size_t ParamNet::input_dim() const { return layers_.front().w.cols; }
std::size_t ParamNet::output_dim() const { return layers_.back().w.rows; }

std::size_t ParamNet::param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += l.w.v.size() + l.b.size();
    for (const StepAffine& a : per_step_) n += a.gain.size() + a.bias.size();
    return n;
}

Vec ParamNet::forward(std::span<const double> input, int step_index, GradTape* tape) const {
    check_dim(input.size(), input_dim(), "net forward input");
    if (tape) {
        *tape = GradTape{};
        tape->input.assign(input.begin(), input.end());
        tape->step_index = step_index;
        tape->net_version = version_;
        tape->valid = true;
    }
    Vec cur(input.begin(), input.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Layer& layer = layers_[l];
        Vec pre(layer.w.rows);
        for (std::size_t r = 0; r < layer.w.rows; ++r)
            pre[r] = kernels::dot(layer.w.row(r), cur.data(), layer.w.cols) + layer.b[r];
        Vec post(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i)
            post[i] = apply_activation(layer.act, pre[i]);
        if (tape) {
            tape->pre.push_back(pre);
            tape->post.push_back(post);
        }
        cur = std::move(post);
    }
    if (step_index >= 0 && !per_step_.empty()) {
        const std::size_t row =
            std::min<std::size_t>(static_cast<std::size_t>(step_index), per_step_.size() - 1);
        const StepAffine& a = per_step_[row];
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = a.gain[i] * cur[i] + a.bias[i];
        if (tape) tape->affine_out = cur;
    }
    return cur;
}

void ParamNet::backward(GradTape& tape, std::span<const double> output_grad, double scale) {
    if (!tape.valid) throw UsageError("backward without a matching forward");
    if (tape.consumed) throw UsageError("tape already consumed by a previous backward");
    if (tape.net_version != version_)
        throw UsageError("stale tape: parameters changed since forward");
    check_dim(output_grad.size(), output_dim(), "net backward output_grad");
    tape.consumed = true;

    Vec g(output_grad.begin(), output_grad.end());
    if (scale != 1.0)
        for (double& v : g) v *= scale;

    if (tape.step_index >= 0 && !per_step_.empty()) {
        const std::size_t row = std::min<std::size_t>(
            static_cast<std::size_t>(tape.step_index), per_step_.size() - 1);
        const StepAffine& a = per_step_[row];
        StepAffine& ga = gstep_[row];
        const Vec& y = tape.post.back();
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga.gain[i] += g[i] * y[i];
            ga.bias[i] += g[i];
            g[i] *= a.gain[i];
        }
    }

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& layer = layers_[li];
        const Vec& pre = tape.pre[li];
        const Vec& post = tape.post[li];
        const Vec& in = li == 0 ? tape.input : tape.post[li - 1];
        // d/d(pre) then weight, bias, and input gradients.
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] *= activation_grad(layer.act, pre[i], post[i]);
        Mat& gw = gw_[li];
        for (std::size_t r = 0; r < layer.w.rows; ++r)
            kernels::axpy(g[r], in.data(), gw.row(r), layer.w.cols);
        kernels::add(g.data(), gb_[li].data(), g.size());
        if (li > 0) {
            Vec gin(layer.w.cols, 0.0);
            for (std::size_t r = 0; r < layer.w.rows; ++r)
                kernels::axpy(g[r], layer.w.row(r), gin.data(), layer.w.cols);
            g = std::move(gin);
        }
    }
}

void ParamNet::zero_grad() {
    for (Mat& m : gw_) std::fill(m.v.begin(), m.v.end(), 0.0);
    for (Vec& v : gb_) std::fill(v.begin(), v.end(), 0.0);
    for (StepAffine& a : gstep_) {
        std::fill(a.gain.begin(), a.gain.end(), 0.0);
        std::fill(a.bias.begin(), a.bias.end(), 0.0);
    }
}

void ParamNet::visit_params(const std::function<void(double&, double&)>& fn) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        for (std::size_t i = 0; i < layers_[l].w.v.size(); ++i)
            fn(layers_[l].w.v[i], gw_[l].v[i]);
        for (std::size_t i = 0; i < layers_[l].b.size(); ++i) fn(layers_[l].b[i], gb_[l][i]);
    }
    for (std::size_t s = 0; s < per_step_.size(); ++s) {
        for (std::size_t i = 0; i < per_step_[s].gain.size(); ++i)
            fn(per_step_[s].gain[i], gstep_[s].gain[i]);
        for (std::size_t i = 0; i < per_step_[s].bias.size(); ++i)
            fn(per_step_[s].bias[i], gstep_[s].bias[i]);
    }
}

Vec ParamNet::flat_params() const {
    Vec out;
    out.reserve(param_count());
    auto& self = const_cast<ParamNet&>(*this);
    self.visit_params([&](double& p, double&) { out.push_back(p); });
    return out;
}

Vec ParamNet::flat_grads() const {
    Vec out;
    out.reserve(param_count());
    auto& self = const_cast<ParamNet&>(*this);
    self.visit_params([&](double&, double& g) { out.push_back(g); });
    return out;
}

void ParamNet::set_flat_params(std::span<const double> p) {
    check_dim(p.size(), param_count(), "set_flat_params");
    std::size_t i = 0;
    visit_params([&](double& param, double&) { param = p[i++]; });
    bump_version();
}

void ParamNet::check_finite_grads() const {
    bool ok = true;
    auto& self = const_cast<ParamNet&>(*this);
    self.visit_params([&](double&, double& g) {
        if (!std::isfinite(g)) ok = false;
    });
    if (!ok) throw TrainingError("non-finite gradient in optimizer step");
}

void ParamNet::sgd_step(double learning_rate) {
    if (!(learning_rate >= 0.0))
        throw ConfigError("sgd: learning rate must be non-negative");
    check_finite_grads();
    visit_params([&](double& p, double& g) {
        p -= learning_rate * g;
        g = 0.0;
    });
    bump_version();
}

void ParamNet::adam_step(double learning_rate, double beta1, double beta2, double eps) {
    if (!(learning_rate >= 0.0))
        throw ConfigError("adam: learning rate must be non-negative");
    check_finite_grads();
    const std::size_t n = param_count();
    if (adam_m_.size() != n) {
        adam_m_.assign(n, 0.0);
        adam_v_.assign(n, 0.0);
        adam_t_ = 0;
    }
    ++adam_t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
    std::size_t i = 0;
    visit_params([&](double& p, double& g) {
        adam_m_[i] = beta1 * adam_m_[i] + (1.0 - beta1) * g;
        adam_v_[i] = beta2 * adam_v_[i] + (1.0 - beta2) * g * g;
        p -= learning_rate * (adam_m_[i] / c1) / (std::sqrt(adam_v_[i] / c2) + eps);
        g = 0.0;
        ++i;
    });
    bump_version();
}

nlohmann::json ParamNet::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& l : layers_) {
        layers.push_back({{"rows", l.w.rows},
                          {"cols", l.w.cols},
                          {"w", l.w.v},
                          {"b", l.b},
                          {"act", activation_name(l.act)}});
    }
    nlohmann::json steps = nlohmann::json::array();
    for (const StepAffine& a : per_step_) steps.push_back({{"gain", a.gain}, {"bias", a.bias}});
    return {{"layers", layers}, {"per_step_affine", steps}};
}

ParamNet ParamNet::from_json(const nlohmann::json& j) {
    std::vector<Layer> layers;
    for (const auto& lj : j.at("layers")) {
        Layer l;
        l.w.rows = lj.at("rows").get<std::size_t>();
        l.w.cols = lj.at("cols").get<std::size_t>();
        l.w.v = lj.at("w").get<Vec>();
        l.b = lj.at("b").get<Vec>();
        l.act = activation_from_name(lj.at("act").get<std::string>());
        if (l.w.v.size() != l.w.rows * l.w.cols)
            throw ParseError("net checkpoint: weight count does not match shape");
        layers.push_back(std::move(l));
    }
    ParamNet net = from_layers(std::move(layers), 0);
    for (const auto& sj : j.at("per_step_affine")) {
        StepAffine a{sj.at("gain").get<Vec>(), sj.at("bias").get<Vec>()};
        if (a.gain.size() != net.output_dim() || a.bias.size() != net.output_dim())
            throw ParseError("net checkpoint: per-step affine width mismatch");
        net.per_step_.push_back(std::move(a));
    }
    net.init_buffers();
    return net;
}

}  // namespace walkback
