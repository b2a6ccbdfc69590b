#include "awet/nnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "awet/error.hpp"

namespace awet::nnet {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "unknown";
}

MlpSpec MlpSpec::make(std::vector<std::size_t> sizes, Activation output, std::vector<double> scale) {
    MlpSpec spec;
    spec.layer_sizes = std::move(sizes);
    spec.output_activation = output;
    if (scale.empty() && !spec.layer_sizes.empty()) scale.assign(spec.layer_sizes.back(), 1.0);
    spec.output_scale = std::move(scale);
    spec.validate();
    return spec;
}

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2) throw InvalidInput("MlpSpec needs at least an input and an output layer");
    for (auto s : layer_sizes)
        if (s == 0) throw InvalidInput("MlpSpec layer sizes must be positive");
    if (hidden_activation != Activation::relu) throw InvalidInput("hidden activation must be relu");
    if (output_activation == Activation::relu) throw InvalidInput("output activation must be tanh or identity");
    if (output_scale.size() != output_dim())
        throw InvalidInput("output_scale length " + std::to_string(output_scale.size()) +
                           " != output dim " + std::to_string(output_dim()));
    for (double s : output_scale)
        if (!(s > 0.0) || !std::isfinite(s)) throw InvalidInput("output_scale entries must be positive");
}

std::size_t MlpSpec::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return n;
}

std::size_t MlpSpec::weight_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += layer_sizes[l] * layer_sizes[l + 1];
    return n;
}

ParameterSet::ParameterSet(const MlpSpec& spec) : layer_sizes_(spec.layer_sizes) {
    spec.validate();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        offsets_.push_back(off);
        off += (layer_sizes_[l] + 1) * layer_sizes_[l + 1];
    }
    values_.assign(off, 0.0);
}

ParameterSet ParameterSet::from_flat(const MlpSpec& spec, std::vector<double> values) {
    ParameterSet p(spec);
    if (values.size() != p.values_.size())
        throw InvalidInput("flat parameter length " + std::to_string(values.size()) + " != " +
                           std::to_string(p.values_.size()));
    std::copy(values.begin(), values.end(), p.values_.begin());
    return p;
}

RowMatrixMap ParameterSet::weights(std::size_t layer) {
    return RowMatrixMap(values_.data() + weight_offset(layer), static_cast<Eigen::Index>(fan_out(layer)),
                        static_cast<Eigen::Index>(fan_in(layer)));
}

ConstRowMatrixMap ParameterSet::weights(std::size_t layer) const {
    return ConstRowMatrixMap(values_.data() + weight_offset(layer), static_cast<Eigen::Index>(fan_out(layer)),
                             static_cast<Eigen::Index>(fan_in(layer)));
}

Eigen::Map<Vector> ParameterSet::bias(std::size_t layer) {
    return Eigen::Map<Vector>(values_.data() + bias_offset(layer), static_cast<Eigen::Index>(fan_out(layer)));
}

Eigen::Map<const Vector> ParameterSet::bias(std::size_t layer) const {
    return Eigen::Map<const Vector>(values_.data() + bias_offset(layer),
                                    static_cast<Eigen::Index>(fan_out(layer)));
}

void ParameterSet::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

void init_uniform(ParameterSet& params, Engine& rng) {
    for (std::size_t l = 0; l < params.num_affine(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(params.fan_in(l)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const std::size_t begin = params.weight_offset(l);
        const std::size_t end = params.bias_offset(l) + params.fan_out(l);
        auto flat = params.flat();
        for (std::size_t i = begin; i < end; ++i) flat[i] = dist(rng);
    }
}

namespace {

// Largest double strictly below 1; keeps scale * tanh(z) strictly inside the
// open interval even when tanh rounds to 1.
constexpr double kTanhCeil = 1.0 - 0x1p-53;

void check_input(const MlpSpec& spec, const Matrix& input) {
    if (static_cast<std::size_t>(input.rows()) != spec.input_dim())
        throw InvalidInput("network input has " + std::to_string(input.rows()) + " rows, expected " +
                           std::to_string(spec.input_dim()));
}

void check_layout(const MlpSpec& spec, const ParameterSet& params) {
    if (params.size() != spec.parameter_count() || params.num_affine() != spec.num_affine())
        throw InvalidInput("parameter set does not match network spec");
}

void apply_output(const MlpSpec& spec, Matrix& z) {
    if (spec.output_activation == Activation::tanh) {
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            const double s = spec.output_scale[static_cast<std::size_t>(r)];
            const double lim = std::nextafter(s, 0.0);
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                const double t = std::clamp(std::tanh(z(r, c)), -kTanhCeil, kTanhCeil);
                z(r, c) = std::clamp(s * t, -lim, lim);
            }
        }
    } else {
        for (Eigen::Index r = 0; r < z.rows(); ++r) z.row(r) *= spec.output_scale[static_cast<std::size_t>(r)];
    }
}

// Returns a_{l+1} given a_l; optionally keeps z_{l+1}.
Matrix affine(const ParameterSet& params, std::size_t l, const Matrix& a) {
    Matrix z = params.weights(l) * a;
    z.colwise() += params.bias(l);
    return z;
}

}  // namespace

Matrix forward_batch(const MlpSpec& spec, const ParameterSet& params, const Matrix& input) {
    check_input(spec, input);
    check_layout(spec, params);
    Matrix a = input;
    const std::size_t L = spec.num_affine();
    for (std::size_t l = 0; l < L; ++l) {
        Matrix z = affine(params, l, a);
        if (l + 1 < L) {
            a = z.cwiseMax(0.0);
        } else {
            apply_output(spec, z);
            a = std::move(z);
        }
        if (!a.allFinite()) throw NumericOverflow("non-finite activation in forward pass", l + 1);
    }
    return a;
}

std::vector<double> forward(const MlpSpec& spec, const ParameterSet& params, std::span<const double> input) {
    if (input.size() != spec.input_dim())
        throw InvalidInput("network input has length " + std::to_string(input.size()) + ", expected " +
                           std::to_string(spec.input_dim()));
    Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    Matrix y = forward_batch(spec, params, x);
    return {y.data(), y.data() + y.size()};
}

GradientTape record(const MlpSpec& spec, const ParameterSet& params, const Matrix& input) {
    check_input(spec, input);
    check_layout(spec, params);
    GradientTape tape;
    const std::size_t L = spec.num_affine();
    tape.activations_.reserve(L + 1);
    tape.pre_.reserve(L);
    tape.activations_.push_back(input);
    for (std::size_t l = 0; l < L; ++l) {
        Matrix z = affine(params, l, tape.activations_.back());
        Matrix a;
        if (l + 1 < L) {
            a = z.cwiseMax(0.0);
        } else {
            a = z;
            apply_output(spec, a);
        }
        if (!a.allFinite()) throw NumericOverflow("non-finite activation in recorded forward pass", l + 1);
        tape.pre_.push_back(std::move(z));
        tape.activations_.push_back(std::move(a));
    }
    return tape;
}

namespace {

Matrix output_delta(const MlpSpec& spec, const Matrix& z, const Matrix& output_grad) {
    Matrix delta(z.rows(), z.cols());
    if (spec.output_activation == Activation::tanh) {
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            const double s = spec.output_scale[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                const double t = std::tanh(z(r, c));
                delta(r, c) = output_grad(r, c) * s * (1.0 - t * t);
            }
        }
    } else {
        for (Eigen::Index r = 0; r < z.rows(); ++r)
            delta.row(r) = output_grad.row(r) * spec.output_scale[static_cast<std::size_t>(r)];
    }
    return delta;
}

}  // namespace

ParameterSet backward(const MlpSpec& spec, const ParameterSet& params, const GradientTape& tape,
                      const Matrix& output_grad, Matrix* input_grad) {
    check_layout(spec, params);
    const std::size_t L = spec.num_affine();
    if (tape.pre_.size() != L) throw InvalidInput("gradient tape was recorded for a different network");
    const Matrix& out = tape.output();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
        throw InvalidInput("output gradient shape does not match the recorded output");
    if (!output_grad.allFinite()) throw NumericOverflow("non-finite loss gradient", L);

    ParameterSet grads(spec);
    Matrix delta = output_delta(spec, tape.pre_.back(), output_grad);
    for (std::size_t l = L; l-- > 0;) {
        const Matrix& a_prev = tape.activations_[l];
        grads.weights(l).noalias() = delta * a_prev.transpose();
        grads.bias(l) = delta.rowwise().sum();
        if (l > 0 || input_grad != nullptr) {
            Matrix back = params.weights(l).transpose() * delta;
            if (l > 0) {
                back = back.cwiseProduct((tape.pre_[l - 1].array() > 0.0).cast<double>().matrix());
                if (!back.allFinite()) throw NumericOverflow("non-finite gradient in backward pass", l);
                delta = std::move(back);
            } else {
                *input_grad = std::move(back);
            }
        }
    }
    for (double g : grads.flat())
        if (!std::isfinite(g)) throw NumericOverflow("non-finite parameter gradient", L);
    return grads;
}

Matrix backward_input(const MlpSpec& spec, const ParameterSet& params, const GradientTape& tape,
                      const Matrix& output_grad) {
    check_layout(spec, params);
    const std::size_t L = spec.num_affine();
    if (tape.pre_.size() != L) throw InvalidInput("gradient tape was recorded for a different network");
    const Matrix& out = tape.output();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
        throw InvalidInput("output gradient shape does not match the recorded output");
    Matrix delta = output_delta(spec, tape.pre_.back(), output_grad);
    for (std::size_t l = L; l-- > 0;) {
        Matrix back = params.weights(l).transpose() * delta;
        if (l > 0) back = back.cwiseProduct((tape.pre_[l - 1].array() > 0.0).cast<double>().matrix());
        if (!back.allFinite()) throw NumericOverflow("non-finite input gradient", l);
        delta = std::move(back);
    }
    return delta;
}

double l2_penalty(const ParameterSet& params) {
    double sum = 0.0;
    for (std::size_t l = 0; l < params.num_affine(); ++l) sum += params.weights(l).squaredNorm();
    return sum;
}

void add_l2_gradient(ParameterSet& grads, const ParameterSet& params, double lambda) {
    if (!grads.same_layout(params)) throw InvalidInput("l2 gradient: layout mismatch");
    if (lambda == 0.0) return;
    for (std::size_t l = 0; l < params.num_affine(); ++l) grads.weights(l) += (2.0 * lambda) * params.weights(l);
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
    const std::size_t n = params.size();
    if (grads.size() != n || state.m.size() != n || state.v.size() != n)
        throw InvalidInput("adam_step: shape mismatch");
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    auto p = params.flat();
    auto g = grads.flat();
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

void polyak_update(ParameterSet& target, const ParameterSet& online, double rho) {
    if (!target.same_layout(online)) throw InvalidInput("polyak_update: layout mismatch");
    auto t = target.flat();
    auto o = online.flat();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rho * t[i] + (1.0 - rho) * o[i];
}

double distance(const ParameterSet& a, const ParameterSet& b) {
    if (!a.same_layout(b)) throw InvalidInput("distance: layout mismatch");
    double s = 0.0;
    auto x = a.flat();
    auto y = b.flat();
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
}

namespace {

constexpr char kMagic[8] = {'A', 'W', 'E', 'T', 'M', 'L', 'P', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    auto bits = std::bit_cast<U>(value);
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    out.write(buf, sizeof(U));
}

template <typename T>
T get_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    char buf[sizeof(U)];
    if (!in.read(buf, sizeof(U))) throw IoError("truncated checkpoint");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return std::bit_cast<T>(bits);
}

}  // namespace

void save_checkpoint(std::ostream& out, const MlpSpec& spec, const ParameterSet& params) {
    check_layout(spec, params);
    out.write(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layer_sizes.size()));
    for (auto s : spec.layer_sizes) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(spec.hidden_activation));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(spec.output_activation));
    for (double s : spec.output_scale) put_le<double>(out, s);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.size()));
    for (double v : params.flat()) put_le<double>(out, v);
    if (!out) throw IoError("failed writing checkpoint");
}

void save_checkpoint(const std::string& path, const MlpSpec& spec, const ParameterSet& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_checkpoint(out, spec, params);
}

Checkpoint load_checkpoint(std::istream& in) {
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
        throw IoError("not an AWET network checkpoint");
    MlpSpec spec;
    const auto n = get_le<std::uint32_t>(in);
    if (n < 2 || n > 64) throw IoError("implausible layer count in checkpoint");
    for (std::uint32_t i = 0; i < n; ++i) spec.layer_sizes.push_back(get_le<std::uint32_t>(in));
    const auto hidden = get_le<std::uint8_t>(in);
    const auto output = get_le<std::uint8_t>(in);
    if (hidden > 2 || output > 2) throw IoError("unknown activation code in checkpoint");
    spec.hidden_activation = static_cast<Activation>(hidden);
    spec.output_activation = static_cast<Activation>(output);
    for (std::size_t i = 0; i < spec.layer_sizes.back(); ++i) spec.output_scale.push_back(get_le<double>(in));
    spec.validate();
    const auto count = get_le<std::uint64_t>(in);
    if (count != spec.parameter_count()) throw IoError("checkpoint parameter count does not match its spec");
    std::vector<double> values(count);
    for (auto& v : values) v = get_le<double>(in);
    return {spec, ParameterSet::from_flat(spec, std::move(values))};
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace awet::nnet
