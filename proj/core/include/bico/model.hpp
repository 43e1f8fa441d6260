#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "bico/matrix.hpp"

namespace bico {

enum class Nonlinearity { identity, relu, gelu };

std::string to_string(Nonlinearity n);
Nonlinearity nonlinearity_from_string(const std::string& s);

struct LayerSpec {
    std::string name;
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    Nonlinearity nonlinearity = Nonlinearity::identity;
    bool has_bias = true;

    bool operator==(const LayerSpec&) const = default;
};

struct VectorInput {
    std::size_t dim = 0;
    bool operator==(const VectorInput&) const = default;
};

/// Square grayscale image split into non-overlapping patch x patch tokens.
struct ImageInput {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t patch = 0;
    bool operator==(const ImageInput&) const = default;
};

using InputKind = std::variant<VectorInput, ImageInput>;

struct ModelSpec {
    InputKind input;
    std::vector<LayerSpec> layers;  // blocks followed by the classification head
    std::size_t num_classes = 0;
    std::size_t depth = 0;  // transferable blocks; head is layers[depth]

    std::size_t input_dim() const;      // flattened example length
    std::size_t token_dim() const;      // per-token feature length fed to layer 0
    std::size_t tokens_per_example() const;
    const LayerSpec& head() const { return layers.back(); }

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/// Labeled dataset/batch. Inputs are one flattened example per row.
struct Batch {
    DenseMatrix inputs;
    std::vector<std::int64_t> labels;

    std::size_t size() const { return inputs.rows(); }
    Batch subset(const std::vector<std::size_t>& indices) const;
};

class Model {
public:
    Model() = default;
    Model(ModelSpec spec, std::vector<DenseMatrix> weights,
          std::vector<std::vector<double>> biases);

    /// Zero-initialized parameters for the given spec.
    static Model zeros(ModelSpec spec);

    const ModelSpec& spec() const { return spec_; }
    std::size_t num_layers() const { return spec_.layers.size(); }

    const DenseMatrix& weight(std::size_t l) const { return weights_[l]; }
    DenseMatrix& weight(std::size_t l) { return weights_[l]; }
    const std::vector<double>& bias(std::size_t l) const { return biases_[l]; }
    std::vector<double>& bias(std::size_t l) { return biases_[l]; }

    std::size_t num_parameters() const;
    bool operator==(const Model&) const = default;

private:
    ModelSpec spec_;
    std::vector<DenseMatrix> weights_;               // d_out x d_in each
    std::vector<std::vector<double>> biases_;        // empty when !has_bias
};

/// Per-layer input activations captured during forward. Matrices are
/// flattened batch-major then token-major: row n*L + t is (example n, token t).
struct ForwardTrace {
    std::size_t batch_size = 0;
    std::size_t tokens_per_example = 0;
    std::vector<DenseMatrix> layer_inputs;   // x^(l), (N*L) x d_in
    std::vector<DenseMatrix> layer_outputs;  // y^(l) = x W^T + b, pre-nonlinearity
    DenseMatrix logits;                      // N x num_classes
};

/// Output-side gradients g^(l) = dL/dy^(l) plus parameter gradients, same
/// row layout as ForwardTrace.
struct BackwardTrace {
    double loss = 0.0;
    std::vector<DenseMatrix> output_grads;        // g^(l), (N*L) x d_out
    std::vector<DenseMatrix> input_grads;         // dL/dx^(l), (N*L) x d_in
    std::vector<DenseMatrix> weight_grads;        // same shape as W^(l)
    std::vector<std::vector<double>> bias_grads;  // length d_out
};

ForwardTrace forward(const Model& model, const DenseMatrix& inputs);

BackwardTrace backward(const Model& model, const ForwardTrace& trace,
                       const std::vector<std::int64_t>& labels);

/// Fraction of examples whose argmax logit equals the label.
double accuracy(const Model& model, const Batch& data);

double nonlinearity_value(Nonlinearity n, double x);
double nonlinearity_derivative(Nonlinearity n, double x);

class Rng;

/// He-style initialization: W ~ N(0, 2/d_in), zero biases.
Model random_init(ModelSpec spec, Rng& rng);

}  // namespace bico
