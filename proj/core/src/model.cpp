#include "bico/model.hpp"

#include <cmath>
#include <numbers>

#include "bico/rng.hpp"

namespace bico {

std::string to_string(Nonlinearity n) {
    switch (n) {
        case Nonlinearity::identity: return "identity";
        case Nonlinearity::relu: return "relu";
        case Nonlinearity::gelu: return "gelu";
    }
    return "identity";
}

Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "identity") return Nonlinearity::identity;
    if (s == "relu") return Nonlinearity::relu;
    if (s == "gelu") return Nonlinearity::gelu;
    throw argument_error("unknown nonlinearity: " + s);
}

double nonlinearity_value(Nonlinearity n, double x) {
    switch (n) {
        case Nonlinearity::identity: return x;
        case Nonlinearity::relu: return x > 0.0 ? x : 0.0;
        case Nonlinearity::gelu: return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
    }
    return x;
}

double nonlinearity_derivative(Nonlinearity n, double x) {
    switch (n) {
        case Nonlinearity::identity: return 1.0;
        case Nonlinearity::relu: return x > 0.0 ? 1.0 : 0.0;
        case Nonlinearity::gelu: {
            const double cdf = 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + x * pdf;
        }
    }
    return 1.0;
}

std::size_t ModelSpec::input_dim() const {
    if (const auto* v = std::get_if<VectorInput>(&input)) return v->dim;
    const auto& img = std::get<ImageInput>(input);
    return img.height * img.width;
}

std::size_t ModelSpec::token_dim() const {
    if (const auto* v = std::get_if<VectorInput>(&input)) return v->dim;
    const auto& img = std::get<ImageInput>(input);
    return img.patch * img.patch;
}

std::size_t ModelSpec::tokens_per_example() const {
    if (std::holds_alternative<VectorInput>(input)) return 1;
    const auto& img = std::get<ImageInput>(input);
    return (img.height / img.patch) * (img.width / img.patch);
}

void ModelSpec::validate() const {
    if (layers.empty()) throw argument_error("ModelSpec: no layers");
    if (num_classes < 1) throw argument_error("ModelSpec: num_classes < 1");
    if (depth + 1 != layers.size())
        throw argument_error("ModelSpec: depth must equal layers.size() - 1");
    if (const auto* img = std::get_if<ImageInput>(&input)) {
        if (img->patch == 0 || img->height % img->patch != 0 || img->width % img->patch != 0)
            throw argument_error("ModelSpec: image dims must be divisible by patch");
    } else if (std::get<VectorInput>(input).dim == 0) {
        throw argument_error("ModelSpec: vector input dim == 0");
    }
    if (layers.front().d_in != token_dim())
        throw argument_error("ModelSpec: layer 0 d_in does not match input token dim");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].d_in < 1 || layers[l].d_out < 1)
            throw argument_error("ModelSpec: layer " + std::to_string(l) + " has zero dim");
        if (l + 1 < layers.size() && layers[l].d_out != layers[l + 1].d_in)
            throw argument_error("ModelSpec: dim chain broken at layer " + std::to_string(l));
    }
    if (layers.back().d_out != num_classes)
        throw argument_error("ModelSpec: head d_out != num_classes");
    if (layers.back().nonlinearity != Nonlinearity::identity)
        throw argument_error("ModelSpec: head nonlinearity must be identity");
}

Batch Batch::subset(const std::vector<std::size_t>& indices) const {
    Batch out;
    out.inputs = DenseMatrix(indices.size(), inputs.cols());
    out.labels.resize(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        for (std::size_t c = 0; c < inputs.cols(); ++c)
            out.inputs(r, c) = inputs(indices[r], c);
        out.labels[r] = labels[indices[r]];
    }
    return out;
}

Model::Model(ModelSpec spec, std::vector<DenseMatrix> weights,
             std::vector<std::vector<double>> biases)
    : spec_(std::move(spec)), weights_(std::move(weights)), biases_(std::move(biases)) {
    spec_.validate();
    if (weights_.size() != spec_.layers.size() || biases_.size() != spec_.layers.size())
        throw shape_error("Model: parameter count does not match spec");
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const auto& ls = spec_.layers[l];
        if (weights_[l].rows() != ls.d_out || weights_[l].cols() != ls.d_in)
            throw shape_error("Model: weight " + std::to_string(l) + " is " +
                              shape_string(weights_[l]) + ", spec wants " +
                              std::to_string(ls.d_out) + "x" + std::to_string(ls.d_in));
        if (biases_[l].size() != (ls.has_bias ? ls.d_out : 0))
            throw shape_error("Model: bias " + std::to_string(l) + " length mismatch");
        weights_[l].require_finite("Model weight");
        for (double b : biases_[l])
            if (!std::isfinite(b)) throw numeric_error("Model: non-finite bias");
    }
}

Model Model::zeros(ModelSpec spec) {
    spec.validate();
    std::vector<DenseMatrix> w;
    std::vector<std::vector<double>> b;
    for (const auto& ls : spec.layers) {
        w.emplace_back(ls.d_out, ls.d_in);
        b.emplace_back(ls.has_bias ? ls.d_out : 0, 0.0);
    }
    return Model(std::move(spec), std::move(w), std::move(b));
}

std::size_t Model::num_parameters() const {
    std::size_t n = 0;
    for (const auto& w : weights_) n += w.size();
    for (const auto& b : biases_) n += b.size();
    return n;
}

namespace {

// N x (h*w) rows -> (N*L) x (patch*patch) token matrix.
DenseMatrix patchify(const DenseMatrix& inputs, const ImageInput& img) {
    const std::size_t ph = img.height / img.patch, pw = img.width / img.patch;
    const std::size_t L = ph * pw, pd = img.patch * img.patch;
    DenseMatrix tokens(inputs.rows() * L, pd);
    for (std::size_t n = 0; n < inputs.rows(); ++n) {
        for (std::size_t pr = 0; pr < ph; ++pr) {
            for (std::size_t pc = 0; pc < pw; ++pc) {
                const std::size_t tok = pr * pw + pc;
                for (std::size_t r = 0; r < img.patch; ++r) {
                    for (std::size_t c = 0; c < img.patch; ++c) {
                        const std::size_t src = (pr * img.patch + r) * img.width +
                                                pc * img.patch + c;
                        tokens(n * L + tok, r * img.patch + c) = inputs(n, src);
                    }
                }
            }
        }
    }
    return tokens;
}

}  // namespace

ForwardTrace forward(const Model& model, const DenseMatrix& inputs) {
    const ModelSpec& spec = model.spec();
    if (inputs.cols() != spec.input_dim())
        throw shape_error("forward: input width " + std::to_string(inputs.cols()) +
                          ", spec wants " + std::to_string(spec.input_dim()));
    inputs.require_finite("forward");

    ForwardTrace trace;
    trace.batch_size = inputs.rows();
    trace.tokens_per_example = spec.tokens_per_example();
    const std::size_t N = trace.batch_size, L = trace.tokens_per_example;

    DenseMatrix x;
    if (const auto* img = std::get_if<ImageInput>(&spec.input))
        x = patchify(inputs, *img);
    else
        x = inputs;

    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const auto& ls = spec.layers[l];
        trace.layer_inputs.push_back(x);
        DenseMatrix y = matmul_a_bt(x, model.weight(l));
        if (ls.has_bias) {
            const auto& b = model.bias(l);
            for (std::size_t r = 0; r < y.rows(); ++r)
                for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b[c];
        }
        trace.layer_outputs.push_back(y);
        if (l + 1 < model.num_layers()) {
            x = std::move(y);
            for (double& v : x.values()) v = nonlinearity_value(ls.nonlinearity, v);
        } else {
            // head: logits are the token mean of the per-token head outputs
            trace.logits = DenseMatrix(N, spec.num_classes);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t t = 0; t < L; ++t)
                    for (std::size_t c = 0; c < spec.num_classes; ++c)
                        trace.logits(n, c) += y(n * L + t, c) / static_cast<double>(L);
        }
    }
    return trace;
}

BackwardTrace backward(const Model& model, const ForwardTrace& trace,
                       const std::vector<std::int64_t>& labels) {
    const ModelSpec& spec = model.spec();
    const std::size_t N = trace.batch_size, L = trace.tokens_per_example;
    const std::size_t C = spec.num_classes;
    if (labels.size() != N)
        throw shape_error("backward: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(N) + " examples");
    for (auto y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw argument_error("backward: label " + std::to_string(y) + " out of range");

    BackwardTrace bt;

    // Mean cross-entropy over examples with softmax on logits.
    DenseMatrix logit_grad(N, C);
    double loss = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        double mx = trace.logits(n, 0);
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, trace.logits(n, c));
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(trace.logits(n, c) - mx);
        loss += -(trace.logits(n, labels[n]) - mx - std::log(z));
        for (std::size_t c = 0; c < C; ++c) {
            double p = std::exp(trace.logits(n, c) - mx) / z;
            logit_grad(n, c) = (p - (static_cast<std::size_t>(labels[n]) == c ? 1.0 : 0.0)) /
                               static_cast<double>(N);
        }
    }
    bt.loss = loss / static_cast<double>(N);

    const std::size_t num_layers = model.num_layers();
    bt.output_grads.resize(num_layers);
    bt.input_grads.resize(num_layers);
    bt.weight_grads.resize(num_layers);
    bt.bias_grads.resize(num_layers);

    // head gradient per token: logits are token means
    DenseMatrix g(N * L, C);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t c = 0; c < C; ++c)
                g(n * L + t, c) = logit_grad(n, c) / static_cast<double>(L);

    for (std::size_t l = num_layers; l-- > 0;) {
        const auto& ls = spec.layers[l];
        bt.output_grads[l] = g;
        bt.weight_grads[l] = matmul_at_b(g, trace.layer_inputs[l]);
        if (ls.has_bias) {
            std::vector<double> gb(ls.d_out, 0.0);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < ls.d_out; ++c) gb[c] += g(r, c);
            bt.bias_grads[l] = std::move(gb);
        }
        DenseMatrix gx = matmul(g, model.weight(l));
        bt.input_grads[l] = gx;
        if (l > 0) {
            const auto& prev = spec.layers[l - 1];
            const DenseMatrix& y_prev = trace.layer_outputs[l - 1];
            g = std::move(gx);
            for (std::size_t i = 0; i < g.size(); ++i)
                g.values()[i] *= nonlinearity_derivative(prev.nonlinearity,
                                                         y_prev.values()[i]);
        }
    }
    return bt;
}

double accuracy(const Model& model, const Batch& data) {
    if (data.size() == 0) throw argument_error("accuracy: empty dataset");
    const ForwardTrace t = forward(model, data.inputs);
    std::size_t hits = 0;
    for (std::size_t n = 0; n < data.size(); ++n) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < t.logits.cols(); ++c)
            if (t.logits(n, c) > t.logits(n, arg)) arg = c;
        if (static_cast<std::int64_t>(arg) == data.labels[n]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

Model random_init(ModelSpec spec, Rng& rng) {
    spec.validate();
    std::vector<DenseMatrix> w;
    std::vector<std::vector<double>> b;
    for (const auto& ls : spec.layers) {
        const double std = std::sqrt(2.0 / static_cast<double>(ls.d_in));
        DenseMatrix m(ls.d_out, ls.d_in);
        for (double& v : m.values()) v = std * rng.normal();
        w.push_back(std::move(m));
        b.emplace_back(ls.has_bias ? ls.d_out : 0, 0.0);
    }
    return Model(std::move(spec), std::move(w), std::move(b));
}

}  // namespace bico
