#include "lwm/tensorgrad.hpp"

#include <cmath>

namespace lwm::tg {

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Scale: return "scale";
    case Op::LinComb: return "lincomb";
    case Op::DiagLinComb: return "diag_lincomb";
    case Op::Affine: return "affine";
    case Op::Softmax: return "softmax";
    case Op::LogSumExp: return "log_sum_exp";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::SquaredNorm: return "squared_norm";
    case Op::Norm: return "norm";
    case Op::Sum: return "sum";
  }
  return "unknown";
}

const Vec& Var::value() const {
  if (!tape) throw TapeError("variable is not attached to a tape");
  return tape->value(*this);
}

double Var::scalar() const {
  const Vec& v = value();
  if (v.size() != 1) throw TapeError("variable is not scalar");
  return v[0];
}

namespace {

Tape* same_tape(Var x, Var y) {
  if (x.tape == nullptr || x.tape != y.tape) throw TapeError("operands live on different tapes");
  return x.tape;
}

void require_same_size(const Vec& x, const Vec& y, const char* what) {
  if (x.size() != y.size()) throw TapeError(std::string("size mismatch in ") + what);
}

double lse(const Vec& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

}  // namespace

void Tape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw TapeError("variable does not belong to this tape");
}

const Vec& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

Op Tape::op(Var v) const {
  check(v);
  return nodes_[v.id].op;
}

Var Tape::push(Node node) {
  evaluate(node);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::input(Vec v) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Vec v) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::evaluate(Node& n) const {
  const auto& x = [&]() -> const Vec& { return nodes_[n.in0].value; };
  const auto& y = [&]() -> const Vec& { return nodes_[n.in1].value; };
  switch (n.op) {
    case Op::Input:
    case Op::Constant:
      return;
    case Op::Add:
      n.value = x() + y();
      return;
    case Op::Sub:
      n.value = x() - y();
      return;
    case Op::Scale:
      n.value = n.a * x();
      return;
    case Op::LinComb:
      n.value = n.a * x() + n.b * y();
      return;
    case Op::DiagLinComb:
      n.value = n.va.cwiseProduct(x()) + n.vb.cwiseProduct(y());
      return;
    case Op::Affine:
      if (n.transposed)
        n.value = n.M->transpose() * x();
      else
        n.value = (*n.M) * x();
      if (n.va.size() > 0) n.value += n.va;
      return;
    case Op::Softmax: {
      const double m = x().maxCoeff();
      n.value = (x().array() - m).exp().matrix();
      n.value /= n.value.sum();
      return;
    }
    case Op::LogSumExp:
      n.value = Vec::Constant(1, lse(x()));
      return;
    case Op::Exp:
      n.value = x().array().exp().matrix();
      return;
    case Op::Log:
      n.value = x().array().log().matrix();
      return;
    case Op::SquaredNorm:
      n.value = Vec::Constant(1, x().squaredNorm());
      return;
    case Op::Norm:
      n.value = Vec::Constant(1, x().norm());
      return;
    case Op::Sum:
      n.value = Vec::Constant(1, x().sum());
      return;
  }
  throw TapeError(std::string("unregistered primitive ") + op_name(n.op));
}

void Tape::set_input(Var v, Vec value) {
  check(v);
  Node& n = nodes_[v.id];
  if (n.op != Op::Input) throw TapeError("set_input on a non-input node");
  if (value.size() != n.value.size()) throw TapeError("set_input changes the input size");
  n.value = std::move(value);
}

void Tape::replay() {
  for (auto& n : nodes_) evaluate(n);
}

std::vector<Vec> Tape::backward(Var root, double seed) const {
  check(root);
  if (nodes_[root.id].value.size() != 1) throw TapeError("backward needs a scalar root");
  std::vector<Vec> adj(root.id + 1);
  adj[root.id] = Vec::Constant(1, seed);
  auto acc = [&](std::size_t id, const auto& g) {
    if (adj[id].size() == 0)
      adj[id] = g;
    else
      adj[id] += g;
  };
  for (std::size_t k = root.id + 1; k-- > 0;) {
    if (adj[k].size() == 0) continue;
    const Node& n = nodes_[k];
    const Vec& g = adj[k];
    switch (n.op) {
      case Op::Input:
      case Op::Constant:
        break;
      case Op::Add:
        acc(n.in0, g);
        acc(n.in1, g);
        break;
      case Op::Sub:
        acc(n.in0, g);
        acc(n.in1, (-g).eval());
        break;
      case Op::Scale:
        acc(n.in0, (n.a * g).eval());
        break;
      case Op::LinComb:
        acc(n.in0, (n.a * g).eval());
        acc(n.in1, (n.b * g).eval());
        break;
      case Op::DiagLinComb:
        acc(n.in0, n.va.cwiseProduct(g).eval());
        acc(n.in1, n.vb.cwiseProduct(g).eval());
        break;
      case Op::Affine:
        if (n.transposed)
          acc(n.in0, ((*n.M) * g).eval());
        else
          acc(n.in0, (n.M->transpose() * g).eval());
        break;
      case Op::Softmax: {
        const Vec& w = n.value;
        acc(n.in0, w.cwiseProduct((g.array() - w.dot(g)).matrix()).eval());
        break;
      }
      case Op::LogSumExp: {
        const Vec& x = nodes_[n.in0].value;
        const Vec w = (x.array() - n.value[0]).exp().matrix();
        acc(n.in0, (g[0] * w).eval());
        break;
      }
      case Op::Exp:
        acc(n.in0, n.value.cwiseProduct(g).eval());
        break;
      case Op::Log:
        acc(n.in0, g.cwiseQuotient(nodes_[n.in0].value).eval());
        break;
      case Op::SquaredNorm:
        acc(n.in0, (2.0 * g[0] * nodes_[n.in0].value).eval());
        break;
      case Op::Norm: {
        const double r = n.value[0];
        const Vec& x = nodes_[n.in0].value;
        acc(n.in0, r > 0.0 ? (g[0] / r * x).eval() : Vec::Zero(x.size()).eval());
        break;
      }
      case Op::Sum:
        acc(n.in0, Vec::Constant(nodes_[n.in0].value.size(), g[0]));
        break;
      default:
        throw TapeError(std::string("unregistered primitive ") + op_name(n.op));
    }
  }
  return adj;
}

Vec Tape::gradient(Var root, Var wrt, double seed) const {
  check(wrt);
  auto adj = backward(root, seed);
  if (wrt.id >= adj.size() || adj[wrt.id].size() == 0) return Vec::Zero(nodes_[wrt.id].value.size());
  return adj[wrt.id];
}

Var add(Var x, Var y) {
  Tape* t = same_tape(x, y);
  require_same_size(t->value(x), t->value(y), "add");
  Tape::Node n;
  n.op = Op::Add;
  n.in0 = x.id;
  n.in1 = y.id;
  return t->push(std::move(n));
}

Var sub(Var x, Var y) {
  Tape* t = same_tape(x, y);
  require_same_size(t->value(x), t->value(y), "sub");
  Tape::Node n;
  n.op = Op::Sub;
  n.in0 = x.id;
  n.in1 = y.id;
  return t->push(std::move(n));
}

Var scale(Var x, double a) {
  Tape* t = same_tape(x, x);
  Tape::Node n;
  n.op = Op::Scale;
  n.in0 = x.id;
  n.a = a;
  return t->push(std::move(n));
}

Var lincomb(double a, Var x, double b, Var y) {
  Tape* t = same_tape(x, y);
  require_same_size(t->value(x), t->value(y), "lincomb");
  Tape::Node n;
  n.op = Op::LinComb;
  n.in0 = x.id;
  n.in1 = y.id;
  n.a = a;
  n.b = b;
  return t->push(std::move(n));
}

Var diag_lincomb(const Vec& a, Var x, const Vec& b, Var y) {
  Tape* t = same_tape(x, y);
  require_same_size(t->value(x), t->value(y), "diag_lincomb");
  require_same_size(a, t->value(x), "diag_lincomb");
  require_same_size(b, t->value(y), "diag_lincomb");
  Tape::Node n;
  n.op = Op::DiagLinComb;
  n.in0 = x.id;
  n.in1 = y.id;
  n.va = a;
  n.vb = b;
  return t->push(std::move(n));
}

Var affine(std::shared_ptr<const Mat> M, Var x, bool transposed, const Vec* c) {
  Tape* t = same_tape(x, x);
  if (!M) throw TapeError("affine with null matrix");
  const Eigen::Index cols = transposed ? M->rows() : M->cols();
  const Eigen::Index rows = transposed ? M->cols() : M->rows();
  if (cols != t->value(x).size()) throw TapeError("size mismatch in affine");
  Tape::Node n;
  n.op = Op::Affine;
  n.in0 = x.id;
  n.M = std::move(M);
  n.transposed = transposed;
  if (c) {
    if (c->size() != rows) throw TapeError("offset size mismatch in affine");
    n.va = *c;
  }
  return t->push(std::move(n));
}

namespace {
void require_tape(Var x) {
  if (!x.tape) throw TapeError("variable is not attached to a tape");
  x.tape->value(x);
}
}  // namespace

#define LWM_UNARY(fname, opcode)    \
  Var fname(Var x) {                \
    require_tape(x);                \
    Tape::Node n;                   \
    n.op = opcode;                  \
    n.in0 = x.id;                   \
    return x.tape->push(std::move(n)); \
  }

LWM_UNARY(softmax, Op::Softmax)
LWM_UNARY(log_sum_exp, Op::LogSumExp)
LWM_UNARY(exp, Op::Exp)
LWM_UNARY(log, Op::Log)
LWM_UNARY(squared_norm, Op::SquaredNorm)
LWM_UNARY(norm, Op::Norm)
LWM_UNARY(sum, Op::Sum)

#undef LWM_UNARY

}  // namespace lwm::tg
