#include "vse/gradient_suite.hpp"

#include <functional>

#include "vse/attention.hpp"
#include "vse/encoders.hpp"
#include "vse/loss.hpp"
#include "vse/model.hpp"

namespace vse {

bool GradientSuiteReport::passed() const {
    if (cases.empty()) return false;
    for (const auto& c : cases) {
        if (!c.passed) return false;
    }
    return true;
}

namespace {

using D = double;
using VarD = Var<D>;
using Inputs = std::span<VarD>;

Tensor<D> random_tensor(Shape dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<D> t(std::move(dims));
    for (auto& v : t.values()) v = u(rng);
    return t;
}

// Values bounded away from 0 so that ReLU kinks are never straddled by the step.
Tensor<D> away_from_zero(Shape dims, Rng& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    Tensor<D> t(std::move(dims));
    for (auto& v : t.values()) v = sign(rng) ? u(rng) : -u(rng);
    return t;
}

// Reduces any output to a scalar with fixed random weights so every output coordinate
// contributes a distinct amount to the gradient.
VarD weighted_sum(const VarD& y, std::uint64_t seed) {
    Rng rng(seed);
    return sum(mul(y, constant(random_tensor(y.dims(), rng))));
}

class Suite {
   public:
    explicit Suite(const GradientSuiteOptions& opt) : opt_(opt), rng_(opt.seed) {}

    void op(const std::string& name, std::function<VarD(Inputs)> f, std::vector<Tensor<D>> point) {
        const std::uint64_t seed = rng_();
        ScalarFunction<D> g = [f, seed](Inputs in) { return weighted_sum(f(in), seed); };
        record(name, grad_check<D>(g, std::move(point), D(opt_.step)));
    }

    void scalar(const std::string& name, std::function<VarD(Inputs)> f, std::vector<Tensor<D>> point) {
        record(name, grad_check<D>(f, std::move(point), D(opt_.step)));
    }

    void params(const std::string& name, const std::function<VarD()>& loss, std::vector<VarD> vars) {
        record(name, grad_check_params<D>(loss, std::span<VarD>(vars), D(opt_.step)));
    }

    Tensor<D> rand(Shape dims) { return random_tensor(std::move(dims), rng_); }
    Tensor<D> nonzero(Shape dims) { return away_from_zero(std::move(dims), rng_); }
    Rng& rng() { return rng_; }

    GradientSuiteReport finish() {
        report_.tolerance = opt_.tolerance;
        return report_;
    }

   private:
    void record(const std::string& name, const GradCheckResult& r) {
        report_.cases.push_back({name, r, r.max_rel_error < opt_.tolerance && r.coords_checked > 0});
        report_.max_rel_error = std::max(report_.max_rel_error, r.max_rel_error);
    }

    GradientSuiteOptions opt_;
    Rng rng_;
    GradientSuiteReport report_;
};

void elementwise_ops(Suite& s) {
    s.op("matmul", [](Inputs in) { return matmul(in[0], in[1]); }, {s.rand({3, 4}), s.rand({4, 2})});
    s.op("pool_rows", [](Inputs in) { return pool_rows(in[0], in[1]); }, {s.rand({3, 4}), s.rand({4, 2})});
    s.op("transpose", [](Inputs in) { return transpose(in[0]); }, {s.rand({3, 5})});
    s.op("add", [](Inputs in) { return add(in[0], in[1]); }, {s.rand({2, 3}), s.rand({2, 3})});
    s.op("sub", [](Inputs in) { return sub(in[0], in[1]); }, {s.rand({2, 3}), s.rand({2, 3})});
    s.op("mul", [](Inputs in) { return mul(in[0], in[1]); }, {s.rand({2, 3}), s.rand({2, 3})});
    s.op("scale", [](Inputs in) { return scale(in[0], D(-1.7)); }, {s.rand({4})});
    s.op("add_scalar", [](Inputs in) { return add_scalar(in[0], D(0.3)); }, {s.rand({2, 2})});
    s.op("add_row_bias", [](Inputs in) { return add_row_bias(in[0], in[1]); }, {s.rand({3, 4}), s.rand({4})});
    s.op("relu", [](Inputs in) { return relu(in[0]); }, {s.nonzero({3, 4})});
    s.op("tanh", [](Inputs in) { return tanh_act(in[0]); }, {s.rand({3, 4})});
    s.op("softmax_rows", [](Inputs in) { return softmax_rows(in[0]); }, {s.rand({3, 5})});
    s.op("l2_normalize", [](Inputs in) { return l2_normalize(in[0]); }, {s.rand({1, 6})});
    s.op("l2_normalize_rows", [](Inputs in) { return l2_normalize_rows(in[0]); }, {s.rand({4, 3})});
    s.op("cosine", [](Inputs in) { return cosine(in[0], in[1]); }, {s.rand({5}), s.rand({5})});
    s.op("frobenius_sq", [](Inputs in) { return frobenius_sq(in[0]); }, {s.rand({3, 3})});
    s.op("sum", [](Inputs in) { return sum(in[0]); }, {s.rand({2, 5})});
    s.op("mean", [](Inputs in) { return mean(in[0]); }, {s.rand({2, 5})});
    s.op("reshape", [](Inputs in) { return reshape(in[0], Shape{3, 2}); }, {s.rand({2, 3})});
    s.op("gather", [](Inputs in) { return gather(in[0], {0, 3, 3, 5, 1, 0}, Shape{2, 3}); }, {s.rand({2, 3})});
    s.op("row", [](Inputs in) { return row(in[0], 1); }, {s.rand({3, 4})});
    s.op("stack_rows",
         [](Inputs in) {
             std::vector<VarD> rows{in[0], in[1], in[0]};
             return stack_rows(std::span<const VarD>(rows));
         },
         {s.rand({1, 4}), s.rand({4})});
    s.op("concat_cols", [](Inputs in) { return concat_cols(in[0], in[1]); }, {s.rand({3, 2}), s.rand({3, 4})});
    s.op("dropout",
         [](Inputs in) {
             Rng mask(99);
             return dropout(in[0], 0.5, mask);
         },
         {s.rand({4, 4})});
    s.op("linear", [](Inputs in) { return linear(in[0], in[1], in[2]); },
         {s.rand({3, 4}), s.rand({4, 2}), s.rand({2})});
}

constexpr std::size_t kDim = 16;
constexpr std::size_t kHidden = 8;
constexpr std::size_t kHeads = 3;
constexpr std::size_t kCells = 9;
constexpr std::size_t kTokens = 5;
constexpr std::size_t kBatch = 4;

void attention_ops(Suite& s) {
    for (auto act : {Activation::relu, Activation::tanh}) {
        const std::string tag = act == Activation::relu ? "relu" : "tanh";
        s.op("attention_weights." + tag,
             [act](Inputs in) {
                 AttentionParams<D> p{in[1], in[2], act, 0.0};
                 return attention_weights(in[0], p);
             },
             {s.rand({kCells, kDim}), s.rand({kHidden, kDim}), s.rand({kHeads, kHidden})});
    }
    s.op("attend", [](Inputs in) { return attend(softmax_rows(in[0]), in[1]); },
         {s.rand({kHeads, kCells}), s.rand({kCells, kDim})});
    s.op("project_joint",
         [](Inputs in) {
             ProjectionParams<D> p{LinearParams<D>{in[1], in[2]}, 0.0};
             return project_joint(in[0], p);
         },
         {s.rand({kHeads, kDim}), s.rand({kHeads * kDim, 6}), s.rand({6})});
}

void encoder_ops(Suite& s) {
    s.op("adapt_features",
         [](Inputs in) { return adapt_features(in[0], LinearParams<D>{in[1], in[2]}); },
         {s.rand({3, 3, 5}), s.rand({5, kDim}), s.rand({kDim})});
    s.op("flatten_spatial", [](Inputs in) { return flatten_spatial(in[0]); }, {s.rand({3, 3, 4})});
    s.op("lookup_embeddings", [](Inputs in) { return lookup_embeddings(TokenSequence{3, 1, 3, 0, 6}, in[0]); },
         {s.rand({7, 4})});

    for (bool bidir : {false, true}) {
        auto enc = make_recurrent_encoder<D>(6, 5, 2, 0.0, bidir, s.rng());
        const auto x = constant(s.rand({kTokens, 6}));
        const std::uint64_t seed = s.rng()();
        s.params(bidir ? "recurrent_encoder.bidirectional" : "recurrent_encoder",
                 [enc, x, seed] { return weighted_sum(encode_text(x, enc), seed); }, enc.parameters());
    }

    auto backbone = make_toy_backbone<D>(3, {2, 2}, {4, 5}, s.rng());
    // Inputs away from zero and small weights keep pre-activations off the ReLU kink.
    const auto image = constant(s.nonzero({8, 8, 3}));
    const std::uint64_t seed = s.rng()();
    s.params("toy_backbone", [backbone, image, seed] { return weighted_sum(toy_visual_backbone(image, backbone), seed); },
             backbone.parameters());
}

void loss_ops(Suite& s) {
    s.scalar("similarity_matrix",
             [](Inputs in) {
                 std::vector<VarD> a{in[0], in[1], in[2]}, b{in[3], in[4], in[5]};
                 return weighted_sum(similarity_matrix<D>(a, b), 5);
             },
             {s.rand({1, 4}), s.rand({1, 4}), s.rand({1, 4}), s.rand({1, 4}), s.rand({1, 4}), s.rand({1, 4})});
    s.scalar("triplet_hard_negative_loss", [](Inputs in) { return triplet_hard_negative_loss(in[0], D(0.2)); },
             {s.rand({kBatch, kBatch})});
    s.scalar("diversity_loss",
             [](Inputs in) { return diversity_loss(softmax_rows(in[0]), softmax_rows(in[1]), kHeads); },
             {s.rand({kHeads, kCells}), s.rand({kHeads, kTokens})});
}

void composed_loss(Suite& s) {
    ModelConfig cfg;
    cfg.feature_channels = 6;
    cfg.model_dim = kDim;
    cfg.attention_hidden = kHidden;
    cfg.heads = kHeads;
    cfg.joint_dim = 12;
    cfg.word_dim = 8;
    cfg.vocab_size = 11;
    cfg.rnn_layers = 2;
    Model<D> model(cfg, s.rng());

    std::vector<Tensor<D>> images;
    std::vector<TokenSequence> captions;
    std::uniform_int_distribution<std::size_t> token(1, cfg.vocab_size - 1);
    for (std::size_t i = 0; i < kBatch; ++i) {
        images.push_back(s.rand({3, 3, cfg.feature_channels}));
        TokenSequence seq;
        for (std::size_t t = 0; t < kTokens; ++t) seq.push_back(token(s.rng()));
        captions.push_back(seq);
    }
    // Large enough margin that every hinge is active, so the full graph is exercised.
    LossConfig loss_cfg{1.5, 0.1, DiversityReduction::mean};
    auto loss = [&] {
        BatchEmbeddings<D> batch;
        for (std::size_t i = 0; i < kBatch; ++i) {
            auto im = model.encode_image(images[i]);
            auto tx = model.encode_text(captions[i]);
            batch.images.push_back(im.joint);
            batch.image_weights.push_back(im.weights);
            batch.sentences.push_back(tx.joint);
            batch.text_weights.push_back(tx.weights);
        }
        return total_loss(batch, loss_cfg).total;
    };
    std::vector<VarD> vars;
    for (const auto& p : model.parameters()) vars.push_back(p.var);
    s.params("total_loss", loss, vars);
}

}  // namespace

GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& options) {
    Suite s(options);
    elementwise_ops(s);
    attention_ops(s);
    encoder_ops(s);
    loss_ops(s);
    composed_loss(s);
    return s.finish();
}

}  // namespace vse
