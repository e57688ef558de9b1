#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lwm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace tg {

class TapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Op {
  Input,
  Constant,
  Add,
  Sub,
  Scale,
  LinComb,      // a*x + b*y, scalar a, b
  DiagLinComb,  // a.*x + b.*y, vector a, b
  Affine,       // M x + c  (or M^T x + c)
  Softmax,
  LogSumExp,
  Exp,
  Log,
  SquaredNorm,
  Norm,
  Sum
};

const char* op_name(Op op);

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Vec& value() const;
  Eigen::Index size() const { return value().size(); }
  double scalar() const;
};

// Append-only record of primitive evaluations. Values are computed eagerly as
// nodes are appended, so the recorded value is the plain evaluation.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Vec v);
  Var constant(Vec v);

  std::size_t size() const { return nodes_.size(); }
  const Vec& value(Var v) const;
  Op op(Var v) const;

  // Adjoints of every node for d(root)/d(node) * seed. root must be scalar.
  std::vector<Vec> backward(Var root, double seed = 1.0) const;
  Vec gradient(Var root, Var wrt, double seed = 1.0) const;

  // Replace an input value and recompute every node in recording order.
  void set_input(Var v, Vec value);
  void replay();

  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  struct Node {
    Op op = Op::Input;
    std::size_t in0 = 0;
    std::size_t in1 = 0;
    double a = 0.0;
    double b = 0.0;
    Vec va;
    Vec vb;
    std::shared_ptr<const Mat> M;
    bool transposed = false;
    Vec value;
  };

  Var push(Node node);
  void evaluate(Node& n) const;
  void check(Var v) const;

  std::vector<Node> nodes_;

  friend Var add(Var, Var);
  friend Var sub(Var, Var);
  friend Var scale(Var, double);
  friend Var lincomb(double, Var, double, Var);
  friend Var diag_lincomb(const Vec&, Var, const Vec&, Var);
  friend Var affine(std::shared_ptr<const Mat>, Var, bool, const Vec*);
  friend Var softmax(Var);
  friend Var log_sum_exp(Var);
  friend Var exp(Var);
  friend Var log(Var);
  friend Var squared_norm(Var);
  friend Var norm(Var);
  friend Var sum(Var);
};

Var add(Var x, Var y);
Var sub(Var x, Var y);
Var scale(Var x, double a);
Var lincomb(double a, Var x, double b, Var y);
Var diag_lincomb(const Vec& a, Var x, const Vec& b, Var y);
// M x + c, or M^T x + c when transposed. c may be null.
Var affine(std::shared_ptr<const Mat> M, Var x, bool transposed = false,
           const Vec* c = nullptr);
Var softmax(Var x);
Var log_sum_exp(Var x);
Var exp(Var x);
Var log(Var x);
Var squared_norm(Var x);
Var norm(Var x);
Var sum(Var x);

}  // namespace tg
}  // namespace lwm
