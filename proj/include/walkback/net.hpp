#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkback/mat.hpp"
#include "walkback/rng.hpp"

namespace walkback {

enum class Activation { identity, relu, leaky_relu, tanh, sigmoid, softplus };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

double apply_activation(Activation a, double x);
// Derivative given the pre-activation and the already-computed output.
double activation_grad(Activation a, double pre, double post);

// Numerically stable softplus and logistic.
double softplus(double x);
double logistic(double x);

struct Layer {
    Mat w;
    Vec b;
    Activation act = Activation::identity;
};

// Per-timestep output conditioning: out = gain * y + bias at the step's row.
// Stands in for the per-step normalization parameters of the full-scale
// models; gain 1 / bias 0 is an exact no-op.
struct StepAffine {
    Vec gain;
    Vec bias;
};

// Forward record consumed by exactly one backward call. A tape from before a
// parameter update is stale and rejected.
struct GradTape {
    Vec input;
    std::vector<Vec> pre;    // pre-activation per layer
    std::vector<Vec> post;   // post-activation per layer (before step affine)
    Vec affine_out;          // final output when a step affine was applied
    int step_index = -1;
    std::uint64_t net_version = 0;
    bool consumed = false;
    bool valid = false;
};

// Dense network with exact reverse-mode gradients. One parameter set serves
// every timestep; the optional per-step affine table is the only
// step-indexed state. Single writer during training; const forward calls are
// safe from concurrent readers (a copy is the parameter snapshot).
class ParamNet {
public:
    ParamNet() = default;

    // Fully-connected stack: sizes = {in, hidden.., out}. per_step_count > 0
    // attaches a per-step affine table with that many rows.
    static ParamNet mlp(const std::vector<std::size_t>& sizes, Activation hidden,
                        Activation output, std::size_t per_step_count, Rng& rng);

    static ParamNet from_layers(std::vector<Layer> layers, std::size_t per_step_count = 0);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t param_count() const;
    bool has_step_affine() const { return !per_step_.empty(); }
    std::size_t step_count() const { return per_step_.size(); }

    // step_index < 0 skips the per-step affine; indices beyond the table
    // clamp to the last row (extra flat sampling steps reuse trained rows).
    Vec forward(std::span<const double> input, int step_index = -1,
                GradTape* tape = nullptr) const;

    // Accumulates scale * dJ/dparam into the gradient buffers, where
    // output_grad = dJ/d(forward output). Returns nothing; read the buffers
    // or step the optimizer.
    void backward(GradTape& tape, std::span<const double> output_grad, double scale = 1.0);

    void zero_grad();
    void sgd_step(double learning_rate);
    void adam_step(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);

    // Flat parameter/gradient access, used by finite-difference checks and
    // the optimizers. Order is stable: layer weights, layer bias, ..., then
    // the affine table.
    void visit_params(const std::function<void(double& p, double& g)>& fn);
    Vec flat_params() const;
    Vec flat_grads() const;
    void set_flat_params(std::span<const double> p);

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers_mut() { return layers_; }
    const std::vector<StepAffine>& step_affine() const { return per_step_; }
    std::vector<StepAffine>& step_affine_mut() { return per_step_; }
    std::uint64_t version() const { return version_; }

    nlohmann::json to_json() const;
    static ParamNet from_json(const nlohmann::json& j);

private:
    void init_buffers();
    void check_finite_grads() const;
    void bump_version() { ++version_; }

    std::vector<Layer> layers_;
    std::vector<StepAffine> per_step_;

    // Gradient accumulators, same shapes as the parameters.
    std::vector<Mat> gw_;
    std::vector<Vec> gb_;
    std::vector<StepAffine> gstep_;

    // Adam state, allocated on first adam_step.
    Vec adam_m_, adam_v_;
    std::int64_t adam_t_ = 0;

    std::uint64_t version_ = 0;
};

}  // namespace walkback
