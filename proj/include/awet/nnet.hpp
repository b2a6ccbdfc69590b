#pragma once

// Dense ReLU networks over 64-bit floats with a one-shot gradient tape.
//
// Batches are column-major matrices shaped (features x batch). Losses are not
// represented as graphs: a caller evaluates its scalar loss on the network
// output and hands the tape dL/d(output); backward() returns dL/d(params) and,
// on request, dL/d(input).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "awet/rng.hpp"

namespace awet::nnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

enum class Activation : std::uint8_t { relu = 0, tanh = 1, identity = 2 };

std::string to_string(Activation a);

struct MlpSpec {
    std::vector<std::size_t> layer_sizes;  // input, hidden..., output
    Activation hidden_activation = Activation::relu;
    Activation output_activation = Activation::identity;
    std::vector<double> output_scale;  // one entry per output, applied after the output activation

    /// Fills output_scale with ones when empty, then validates.
    static MlpSpec make(std::vector<std::size_t> sizes, Activation output = Activation::identity,
                        std::vector<double> scale = {});

    void validate() const;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t num_affine() const { return layer_sizes.size() - 1; }
    std::size_t parameter_count() const;
    std::size_t weight_count() const;

    bool operator==(const MlpSpec&) const = default;
};

/// Flat parameter storage. Layout per affine layer l: row-major weight matrix
/// (out x in), then the bias vector (out).
class ParameterSet {
public:
    ParameterSet() = default;
    explicit ParameterSet(const MlpSpec& spec);

    static ParameterSet from_flat(const MlpSpec& spec, std::vector<double> values);

    std::span<double> flat() { return values_; }
    std::span<const double> flat() const { return values_; }
    std::size_t size() const { return values_.size(); }

    std::size_t num_affine() const { return layer_sizes_.size() - 1; }
    std::size_t fan_in(std::size_t layer) const { return layer_sizes_[layer]; }
    std::size_t fan_out(std::size_t layer) const { return layer_sizes_[layer + 1]; }
    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return offsets_[layer] + fan_in(layer) * fan_out(layer);
    }

    RowMatrixMap weights(std::size_t layer);
    ConstRowMatrixMap weights(std::size_t layer) const;
    Eigen::Map<Vector> bias(std::size_t layer);
    Eigen::Map<const Vector> bias(std::size_t layer) const;

    bool same_layout(const ParameterSet& other) const { return layer_sizes_ == other.layer_sizes_; }
    void set_zero();

    bool operator==(const ParameterSet&) const = default;

private:
    std::vector<std::size_t> layer_sizes_;
    std::vector<std::size_t> offsets_;
    // Eigen-aligned: kernel peeling, and so rounding, stays fixed run to run.
    std::vector<double, Eigen::aligned_allocator<double>> values_;
};

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases.
void init_uniform(ParameterSet& params, Engine& rng);

/// Recorded forward pass for a batch; consumed by backward().
class GradientTape {
public:
    const Matrix& output() const { return activations_.back(); }
    const Matrix& input() const { return activations_.front(); }

private:
    friend GradientTape record(const MlpSpec&, const ParameterSet&, const Matrix&);
    friend ParameterSet backward(const MlpSpec&, const ParameterSet&, const GradientTape&, const Matrix&,
                                 Matrix*);
    friend Matrix backward_input(const MlpSpec&, const ParameterSet&, const GradientTape&, const Matrix&);
    std::vector<Matrix> activations_;  // a_0 = input, ..., a_L = output
    std::vector<Matrix> pre_;          // z_1 ... z_L
};

Matrix forward_batch(const MlpSpec& spec, const ParameterSet& params, const Matrix& input);
std::vector<double> forward(const MlpSpec& spec, const ParameterSet& params, std::span<const double> input);

GradientTape record(const MlpSpec& spec, const ParameterSet& params, const Matrix& input);

/// Vector-Jacobian product for dL/d(output) = output_grad. When input_grad is
/// non-null it receives dL/d(input).
ParameterSet backward(const MlpSpec& spec, const ParameterSet& params, const GradientTape& tape,
                      const Matrix& output_grad, Matrix* input_grad = nullptr);

/// dL/d(input) only; skips parameter gradients (frozen networks).
Matrix backward_input(const MlpSpec& spec, const ParameterSet& params, const GradientTape& tape,
                      const Matrix& output_grad);

/// Sum of squared weights; biases excluded.
double l2_penalty(const ParameterSet& params);
/// grads += lambda * d(l2_penalty)/d(params).
void add_l2_gradient(ParameterSet& grads, const ParameterSet& params, double lambda);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state);

/// target <- rho * target + (1 - rho) * online
void polyak_update(ParameterSet& target, const ParameterSet& online, double rho);

/// Euclidean distance between two parameter vectors of equal layout.
double distance(const ParameterSet& a, const ParameterSet& b);

// Checkpoint record: "AWETMLP1", u32 n_sizes, u32 sizes[n], u8 hidden act,
// u8 output act, f64 scale[out], u64 n_params, f64 params[n_params]; all
// little-endian.
void save_checkpoint(std::ostream& out, const MlpSpec& spec, const ParameterSet& params);
void save_checkpoint(const std::string& path, const MlpSpec& spec, const ParameterSet& params);

struct Checkpoint {
    MlpSpec spec;
    ParameterSet params;
};
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace awet::nnet
