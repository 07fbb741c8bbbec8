#include "toothseg/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "toothseg/common.hpp"

namespace toothseg {

namespace {

DenseLayer zero_layer(int out, int in) {
  return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
}

void glorot(DenseLayer& layer, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
  // Column-major fill order is part of the seed contract.
  for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      layer.weight(i, j) = uniform(rng, -limit, limit);
    }
  }
}

void require_shape(const ModelParams& params, const FaceFeatures& features) {
  if (features.cols() != params.shape.input) {
    throw Error("feature width " + std::to_string(features.cols()) + " does not match model input " +
                std::to_string(params.shape.input));
  }
}

struct Activations {
  Eigen::MatrixXd pre1, h1, pre2, h2;
  Prediction out;
};

Activations run_forward(const ModelParams& p, const FaceFeatures& x) {
  require_shape(p, x);
  Activations a;
  a.pre1.noalias() = x * p.hidden1.weight.transpose();
  a.pre1.rowwise() += p.hidden1.bias.transpose();
  a.h1 = a.pre1.cwiseMax(0.0);
  a.pre2.noalias() = a.h1 * p.hidden2.weight.transpose();
  a.pre2.rowwise() += p.hidden2.bias.transpose();
  a.h2 = a.pre2.cwiseMax(0.0);

  Eigen::MatrixXd logits = a.h2 * p.classifier.weight.transpose();
  logits.rowwise() += p.classifier.bias.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  a.out.probs = logits.array().exp().matrix();
  const Eigen::VectorXd sums = a.out.probs.rowwise().sum();
  a.out.probs.array().colwise() /= sums.array();

  a.out.embed.noalias() = a.h2 * p.embedding.weight.transpose();
  a.out.embed.rowwise() += p.embedding.bias.transpose();
  return a;
}

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelShape& shape) {
  if (shape.input < 1 || shape.hidden < 1 || shape.classes < 2 || shape.embed < 1) {
    throw ConfigError("invalid model shape");
  }
  ModelParams p;
  p.shape = shape;
  p.hidden1 = zero_layer(shape.hidden, shape.input);
  p.hidden2 = zero_layer(shape.hidden, shape.hidden);
  p.classifier = zero_layer(shape.classes, shape.hidden);
  p.embedding = zero_layer(shape.embed, shape.hidden);
  return p;
}

ModelParams ModelParams::init(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p = zeros(shape);
  Rng rng(seed);
  glorot(p.hidden1, rng);
  glorot(p.hidden2, rng);
  glorot(p.classifier, rng);
  glorot(p.embedding, rng);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t count = 0;
  for (const DenseLayer* l : {&hidden1, &hidden2, &classifier, &embedding}) {
    count += static_cast<std::size_t>(l->weight.size() + l->bias.size());
  }
  return count;
}

bool ModelParams::all_finite() const {
  for (const DenseLayer* l : {&hidden1, &hidden2, &classifier, &embedding}) {
    if (!l->weight.allFinite() || !l->bias.allFinite()) return false;
  }
  return true;
}

void for_each_tensor(ModelParams& params,
                     const std::function<void(Eigen::Ref<Eigen::MatrixXd>)>& fn) {
  for (DenseLayer* l : {&params.hidden1, &params.hidden2, &params.classifier, &params.embedding}) {
    fn(l->weight);
    fn(l->bias);
  }
}

void for_each_tensor_pair(ModelParams& a, const ModelParams& b,
                          const std::function<void(Eigen::Ref<Eigen::MatrixXd>,
                                                   const Eigen::Ref<const Eigen::MatrixXd>&)>& fn) {
  if (!(a.shape == b.shape)) throw Error("model shapes differ");
  DenseLayer* la[] = {&a.hidden1, &a.hidden2, &a.classifier, &a.embedding};
  const DenseLayer* lb[] = {&b.hidden1, &b.hidden2, &b.classifier, &b.embedding};
  for (int i = 0; i < 4; ++i) {
    fn(la[i]->weight, lb[i]->weight);
    fn(la[i]->bias, lb[i]->bias);
  }
}

Prediction forward(const ModelParams& params, const FaceFeatures& features) {
  return run_forward(params, features).out;
}

ModelParams backward(const ModelParams& params, const FaceFeatures& features,
                     const Eigen::MatrixXd& grad_probs, const Eigen::MatrixXd& grad_embed) {
  const Activations a = run_forward(params, features);
  const Eigen::Index n = features.rows();
  const bool has_probs = grad_probs.size() > 0;
  const bool has_embed = grad_embed.size() > 0;
  if (has_probs && (grad_probs.rows() != n || grad_probs.cols() != params.shape.classes)) {
    throw Error("probs gradient has shape " + std::to_string(grad_probs.rows()) + "x" +
                std::to_string(grad_probs.cols()));
  }
  if (has_embed && (grad_embed.rows() != n || grad_embed.cols() != params.shape.embed)) {
    throw Error("embedding gradient has shape " + std::to_string(grad_embed.rows()) + "x" +
                std::to_string(grad_embed.cols()));
  }

  ModelParams g = ModelParams::zeros(params.shape);
  Eigen::MatrixXd grad_h2 = Eigen::MatrixXd::Zero(n, params.shape.hidden);
  if (has_probs) {
    // Softmax Jacobian: dz = p * (dp - <p, dp>).
    const Eigen::VectorXd inner = (a.out.probs.array() * grad_probs.array()).rowwise().sum();
    Eigen::MatrixXd grad_logits = grad_probs;
    grad_logits.colwise() -= inner;
    grad_logits.array() *= a.out.probs.array();
    g.classifier.weight.noalias() = grad_logits.transpose() * a.h2;
    g.classifier.bias = grad_logits.colwise().sum().transpose();
    grad_h2.noalias() += grad_logits * params.classifier.weight;
  }
  if (has_embed) {
    g.embedding.weight.noalias() = grad_embed.transpose() * a.h2;
    g.embedding.bias = grad_embed.colwise().sum().transpose();
    grad_h2.noalias() += grad_embed * params.embedding.weight;
  }
  const Eigen::MatrixXd grad_pre2 = (a.pre2.array() > 0.0).select(grad_h2, 0.0);
  g.hidden2.weight.noalias() = grad_pre2.transpose() * a.h1;
  g.hidden2.bias = grad_pre2.colwise().sum().transpose();
  const Eigen::MatrixXd grad_h1 = grad_pre2 * params.hidden2.weight;
  const Eigen::MatrixXd grad_pre1 = (a.pre1.array() > 0.0).select(grad_h1, 0.0);
  g.hidden1.weight.noalias() = grad_pre1.transpose() * features;
  g.hidden1.bias = grad_pre1.colwise().sum().transpose();
  return g;
}

OptimState OptimState::for_params(const ModelParams& params, double learning_rate) {
  OptimState s;
  s.learning_rate = learning_rate;
  s.first_moment = ModelParams::zeros(params.shape);
  s.second_moment = ModelParams::zeros(params.shape);
  return s;
}

void adam_update(ModelParams& params, const ModelParams& grads, OptimState& opt) {
  if (!(grads.shape == params.shape) || !(opt.first_moment.shape == params.shape)) {
    throw Error("optimizer update: parameter, gradient and moment shapes differ");
  }
  if (!grads.all_finite()) {
    throw Error("optimizer update at step " + std::to_string(opt.step + 1) +
                ": gradient contains non-finite values");
  }
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double correct1 = 1.0 - std::pow(opt.beta1, t);
  const double correct2 = 1.0 - std::pow(opt.beta2, t);
  const double b1 = opt.beta1, b2 = opt.beta2, lr = opt.learning_rate, eps = opt.epsilon;

  for_each_tensor_pair(opt.first_moment, grads, [&](auto m, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
  });
  for_each_tensor_pair(opt.second_moment, grads, [&](auto v, const auto& g) {
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
  });
  // Walk params, m and v together.
  DenseLayer* p[] = {&params.hidden1, &params.hidden2, &params.classifier, &params.embedding};
  const DenseLayer* m[] = {&opt.first_moment.hidden1, &opt.first_moment.hidden2,
                           &opt.first_moment.classifier, &opt.first_moment.embedding};
  const DenseLayer* v[] = {&opt.second_moment.hidden1, &opt.second_moment.hidden2,
                           &opt.second_moment.classifier, &opt.second_moment.embedding};
  auto step = [&](auto& param, const auto& mom1, const auto& mom2) {
    param.array() -= lr * (mom1.array() / correct1) / ((mom2.array() / correct2).sqrt() + eps);
  };
  for (int i = 0; i < 4; ++i) {
    step(p[i]->weight, m[i]->weight, v[i]->weight);
    step(p[i]->bias, m[i]->bias, v[i]->bias);
  }
}

std::string save_checkpoint(const ModelParams& params, const OptimState& opt) {
  std::ostringstream out;
  const ModelShape& s = params.shape;
  out << "toothseg-checkpoint 1\n";
  out << "shape " << s.input << ' ' << s.hidden << ' ' << s.classes << ' ' << s.embed << '\n';
  out << "adam " << hex(opt.learning_rate) << ' ' << hex(opt.beta1) << ' ' << hex(opt.beta2) << ' '
      << hex(opt.epsilon) << ' ' << opt.step << '\n';
  auto dump = [&out](const char* group, const ModelParams& p) {
    const char* names[] = {"hidden1.weight",    "hidden1.bias",    "hidden2.weight",
                           "hidden2.bias",      "classifier.weight", "classifier.bias",
                           "embedding.weight",  "embedding.bias"};
    int idx = 0;
    ModelParams copy = p;
    for_each_tensor(copy, [&](Eigen::Ref<Eigen::MatrixXd> t) {
      out << "tensor " << group << '.' << names[idx++] << ' ' << t.rows() << ' ' << t.cols() << '\n';
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.cols(); ++j) out << (j ? " " : "") << hex(t(i, j));
        out << '\n';
      }
    });
  };
  dump("params", params);
  dump("m", opt.first_moment);
  dump("v", opt.second_moment);
  return out.str();
}

Checkpoint load_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "toothseg-checkpoint") throw ParseError("not a toothseg checkpoint", 1);
  if (version != 1) throw ParseError("unsupported checkpoint version " + std::to_string(version), 1);

  auto read_double = [&in]() {
    std::string tok;
    if (!(in >> tok)) throw ParseError("truncated checkpoint", 0);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw ParseError("bad number '" + tok + "' in checkpoint", 0);
    return v;
  };
  auto expect = [&in](const std::string& word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw ParseError("checkpoint: expected '" + word + "'", 0);
  };

  ModelShape shape;
  expect("shape");
  in >> shape.input >> shape.hidden >> shape.classes >> shape.embed;
  if (!in) throw ParseError("checkpoint: bad shape line", 2);
  Checkpoint cp;
  cp.params = ModelParams::zeros(shape);
  cp.opt = OptimState::for_params(cp.params);
  expect("adam");
  cp.opt.learning_rate = read_double();
  cp.opt.beta1 = read_double();
  cp.opt.beta2 = read_double();
  cp.opt.epsilon = read_double();
  in >> cp.opt.step;
  if (!in) throw ParseError("checkpoint: bad optimizer line", 3);

  auto load = [&](ModelParams& p) {
    for_each_tensor(p, [&](Eigen::Ref<Eigen::MatrixXd> t) {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      expect("tensor");
      in >> name >> rows >> cols;
      if (!in || rows != t.rows() || cols != t.cols()) {
        throw ParseError("checkpoint tensor '" + name + "' has unexpected shape", 0);
      }
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) t(i, j) = read_double();
      }
    });
  };
  load(cp.params);
  load(cp.opt.first_moment);
  load(cp.opt.second_moment);
  return cp;
}

}  // namespace toothseg
