#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvs/error.hpp"

namespace mvs::ad {

struct ShapeMismatch : Error {
    using Error::Error;
};
struct NotScalar : Error {
    using Error::Error;
};

// Dense row-major 2-D tensor of doubles. Scalars are 1x1, row vectors 1xn.
struct Tensor {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v[0] = x;
        return t;
    }

    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// Reverse-mode tape over tensor ops. Node ids are indices into the tape;
// backward() visits nodes once in reverse construction order, so gradient
// accumulation is deterministic.
class Tape {
public:
    int leaf(Tensor value, bool requires_grad = false);
    int constant(Tensor value) { return leaf(std::move(value), false); }

    int add(int a, int b);  // same shape, or (n,m)+(1,m) row broadcast
    int sub(int a, int b);  // same shape
    int mul(int a, int b);  // elementwise, same shape
    int scale(int a, double s);
    int add_const(int a, double c);
    int matmul(int a, int b);
    int relu(int a);
    int tanh_(int a);
    int sqrt_(int a);  // d/dx defined as 0 where x ~ 0 (subgradient choice)
    int concat(int a, int b, int axis);  // 0: stack rows, 1: stack cols
    int reshape(int a, int rows, int cols);
    int reduce_sum(int a);  // -> scalar
    // axis=1: per-row min -> (n,1); axis=0: per-column min -> (1,m).
    // Indices are constants of the forward pass.
    int reduce_min_with_index(int a, int axis, std::vector<int>* indices = nullptr);
    int reduce_max_with_index(int a, int axis, std::vector<int>* indices = nullptr);
    int gather_rows(int a, std::vector<int> indices);
    // (n,3) x (m,3) -> (n,m) pairwise squared Euclidean distances
    int sqdist_matrix(int a, int b);

    const Tensor& value(int id) const { return nodes_[id].value; }
    std::size_t node_count() const { return nodes_.size(); }

    // Reverse pass from a scalar loss. Gradients of all nodes on a path from
    // a requires_grad leaf are retained and readable via grad().
    void backward(int loss);
    const Tensor& grad(int id) const { return grads_[id]; }
    bool has_grad(int id) const {
        return id < static_cast<int>(grads_.size()) && !grads_[id].v.empty();
    }

private:
    enum class Op {
        Leaf, Add, AddBroadcast, Sub, Mul, Scale, AddConst, MatMul, Relu, Tanh,
        Sqrt, Concat0, Concat1, Reshape, ReduceSum, ReduceMin0, ReduceMin1,
        ReduceMax0, ReduceMax1, GatherRows, SqDist
    };
    struct Node {
        Op op = Op::Leaf;
        int in0 = -1, in1 = -1;
        Tensor value;
        double scalar_arg = 0.0;
        std::vector<int> aux;  // argmin/argmax or gather indices
        bool needs_grad = false;
    };

    int push(Node n);
    int reduce_minmax(int a, int axis, bool is_min, std::vector<int>* indices);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// 64-bit FNV-1a over a tensor's raw data; used for freezing contracts.
std::uint64_t checksum(const Tensor& t);

}  // namespace mvs::ad
