#include "mvs/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace mvs::ad {

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    Node n;
    n.in0 = a;
    n.in1 = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    if (ta.same_shape(tb)) {
        n.op = Op::Add;
        n.value = ta;
        for (std::size_t i = 0; i < n.value.size(); ++i) n.value.v[i] += tb.v[i];
    } else if (tb.rows == 1 && tb.cols == ta.cols) {
        n.op = Op::AddBroadcast;
        n.value = ta;
        for (int i = 0; i < ta.rows; ++i)
            for (int j = 0; j < ta.cols; ++j) n.value.at(i, j) += tb.at(0, j);
    } else {
        throw ShapeMismatch("add: incompatible shapes");
    }
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (!ta.same_shape(tb)) throw ShapeMismatch("sub: incompatible shapes");
    Node n;
    n.op = Op::Sub;
    n.in0 = a;
    n.in1 = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.v[i] -= tb.v[i];
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (!ta.same_shape(tb)) throw ShapeMismatch("mul: incompatible shapes");
    Node n;
    n.op = Op::Mul;
    n.in0 = a;
    n.in1 = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.v[i] *= tb.v[i];
    return push(std::move(n));
}

int Tape::scale(int a, double s) {
    Node n;
    n.op = Op::Scale;
    n.in0 = a;
    n.scalar_arg = s;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x *= s;
    return push(std::move(n));
}

int Tape::add_const(int a, double c) {
    Node n;
    n.op = Op::AddConst;
    n.in0 = a;
    n.scalar_arg = c;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x += c;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.cols != tb.rows) throw ShapeMismatch("matmul: inner dims differ");
    Node n;
    n.op = Op::MatMul;
    n.in0 = a;
    n.in1 = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.value = Tensor(ta.rows, tb.cols);
    for (int i = 0; i < ta.rows; ++i)
        for (int k = 0; k < ta.cols; ++k) {
            double av = ta.at(i, k);
            if (av == 0.0) continue;
            for (int j = 0; j < tb.cols; ++j) n.value.at(i, j) += av * tb.at(k, j);
        }
    return push(std::move(n));
}

int Tape::relu(int a) {
    Node n;
    n.op = Op::Relu;
    n.in0 = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x = std::max(x, 0.0);
    return push(std::move(n));
}

int Tape::tanh_(int a) {
    Node n;
    n.op = Op::Tanh;
    n.in0 = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x = std::tanh(x);
    return push(std::move(n));
}

int Tape::sqrt_(int a) {
    Node n;
    n.op = Op::Sqrt;
    n.in0 = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = nodes_[a].value;
    for (double& x : n.value.v) x = std::sqrt(std::max(x, 0.0));
    return push(std::move(n));
}

int Tape::concat(int a, int b, int axis) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    Node n;
    n.in0 = a;
    n.in1 = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    if (axis == 0) {
        if (ta.cols != tb.cols) throw ShapeMismatch("concat axis 0: cols differ");
        n.op = Op::Concat0;
        n.value = Tensor(ta.rows + tb.rows, ta.cols);
        std::copy(ta.v.begin(), ta.v.end(), n.value.v.begin());
        std::copy(tb.v.begin(), tb.v.end(), n.value.v.begin() + ta.v.size());
    } else if (axis == 1) {
        if (ta.rows != tb.rows) throw ShapeMismatch("concat axis 1: rows differ");
        n.op = Op::Concat1;
        n.value = Tensor(ta.rows, ta.cols + tb.cols);
        for (int i = 0; i < ta.rows; ++i) {
            for (int j = 0; j < ta.cols; ++j) n.value.at(i, j) = ta.at(i, j);
            for (int j = 0; j < tb.cols; ++j) n.value.at(i, ta.cols + j) = tb.at(i, j);
        }
    } else {
        throw ShapeMismatch("concat: axis must be 0 or 1");
    }
    return push(std::move(n));
}

int Tape::reshape(int a, int rows, int cols) {
    const Tensor& ta = nodes_[a].value;
    if (static_cast<std::size_t>(rows) * cols != ta.size())
        throw ShapeMismatch("reshape: element count differs");
    Node n;
    n.op = Op::Reshape;
    n.in0 = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = ta;
    n.value.rows = rows;
    n.value.cols = cols;
    return push(std::move(n));
}

int Tape::reduce_sum(int a) {
    Node n;
    n.op = Op::ReduceSum;
    n.in0 = a;
    n.needs_grad = nodes_[a].needs_grad;
    double s = 0.0;
    for (double x : nodes_[a].value.v) s += x;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

int Tape::reduce_minmax(int a, int axis, bool is_min, std::vector<int>* indices) {
    const Tensor& ta = nodes_[a].value;
    Node n;
    n.in0 = a;
    n.needs_grad = nodes_[a].needs_grad;
    if (axis == 1) {
        n.op = is_min ? Op::ReduceMin1 : Op::ReduceMax1;
        n.value = Tensor(ta.rows, 1);
        n.aux.resize(ta.rows);
        for (int i = 0; i < ta.rows; ++i) {
            int best = 0;
            double bv = ta.at(i, 0);
            for (int j = 1; j < ta.cols; ++j) {
                double x = ta.at(i, j);
                if (is_min ? (x < bv) : (x > bv)) {  // ties keep the lowest index
                    bv = x;
                    best = j;
                }
            }
            n.value.at(i, 0) = bv;
            n.aux[i] = best;
        }
    } else if (axis == 0) {
        n.op = is_min ? Op::ReduceMin0 : Op::ReduceMax0;
        n.value = Tensor(1, ta.cols);
        n.aux.resize(ta.cols);
        for (int j = 0; j < ta.cols; ++j) {
            int best = 0;
            double bv = ta.at(0, j);
            for (int i = 1; i < ta.rows; ++i) {
                double x = ta.at(i, j);
                if (is_min ? (x < bv) : (x > bv)) {
                    bv = x;
                    best = i;
                }
            }
            n.value.at(0, j) = bv;
            n.aux[j] = best;
        }
    } else {
        throw ShapeMismatch("reduce_min/max: axis must be 0 or 1");
    }
    if (indices) *indices = n.aux;
    return push(std::move(n));
}

int Tape::reduce_min_with_index(int a, int axis, std::vector<int>* indices) {
    return reduce_minmax(a, axis, true, indices);
}

int Tape::reduce_max_with_index(int a, int axis, std::vector<int>* indices) {
    return reduce_minmax(a, axis, false, indices);
}

int Tape::gather_rows(int a, std::vector<int> indices) {
    const Tensor& ta = nodes_[a].value;
    Node n;
    n.op = Op::GatherRows;
    n.in0 = a;
    n.needs_grad = nodes_[a].needs_grad;
    n.value = Tensor(static_cast<int>(indices.size()), ta.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        int src = indices[i];
        if (src < 0 || src >= ta.rows) throw ShapeMismatch("gather_rows: index out of range");
        for (int j = 0; j < ta.cols; ++j)
            n.value.at(static_cast<int>(i), j) = ta.at(src, j);
    }
    n.aux = std::move(indices);
    return push(std::move(n));
}

int Tape::sqdist_matrix(int a, int b) {
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    if (ta.cols != tb.cols) throw ShapeMismatch("sqdist_matrix: point dims differ");
    Node n;
    n.op = Op::SqDist;
    n.in0 = a;
    n.in1 = b;
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    n.value = Tensor(ta.rows, tb.rows);
    for (int i = 0; i < ta.rows; ++i)
        for (int j = 0; j < tb.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < ta.cols; ++k) {
                double d = ta.at(i, k) - tb.at(j, k);
                s += d * d;
            }
            n.value.at(i, j) = s;
        }
    return push(std::move(n));
}

void Tape::backward(int loss) {
    const Tensor& lv = nodes_[loss].value;
    if (lv.rows != 1 || lv.cols != 1)
        throw NotScalar("backward: loss must be a scalar");

    grads_.assign(nodes_.size(), Tensor());
    auto ensure = [&](int id) -> Tensor& {
        if (grads_[id].v.empty())
            grads_[id] = Tensor(nodes_[id].value.rows, nodes_[id].value.cols);
        return grads_[id];
    };
    ensure(loss).v[0] = 1.0;

    for (int id = loss; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (!n.needs_grad || grads_[id].v.empty()) continue;
        const Tensor& g = grads_[id];
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add: {
                if (nodes_[n.in0].needs_grad) {
                    Tensor& g0 = ensure(n.in0);
                    for (std::size_t i = 0; i < g.size(); ++i) g0.v[i] += g.v[i];
                }
                if (nodes_[n.in1].needs_grad) {
                    Tensor& g1 = ensure(n.in1);
                    for (std::size_t i = 0; i < g.size(); ++i) g1.v[i] += g.v[i];
                }
                break;
            }
            case Op::AddBroadcast: {
                if (nodes_[n.in0].needs_grad) {
                    Tensor& g0 = ensure(n.in0);
                    for (std::size_t i = 0; i < g.size(); ++i) g0.v[i] += g.v[i];
                }
                if (nodes_[n.in1].needs_grad) {
                    Tensor& g1 = ensure(n.in1);
                    for (int i = 0; i < g.rows; ++i)
                        for (int j = 0; j < g.cols; ++j) g1.at(0, j) += g.at(i, j);
                }
                break;
            }
            case Op::Sub: {
                if (nodes_[n.in0].needs_grad) {
                    Tensor& g0 = ensure(n.in0);
                    for (std::size_t i = 0; i < g.size(); ++i) g0.v[i] += g.v[i];
                }
                if (nodes_[n.in1].needs_grad) {
                    Tensor& g1 = ensure(n.in1);
                    for (std::size_t i = 0; i < g.size(); ++i) g1.v[i] -= g.v[i];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& a = nodes_[n.in0].value;
                const Tensor& b = nodes_[n.in1].value;
                if (nodes_[n.in0].needs_grad) {
                    Tensor& g0 = ensure(n.in0);
                    for (std::size_t i = 0; i < g.size(); ++i) g0.v[i] += g.v[i] * b.v[i];
                }
                if (nodes_[n.in1].needs_grad) {
                    Tensor& g1 = ensure(n.in1);
                    for (std::size_t i = 0; i < g.size(); ++i) g1.v[i] += g.v[i] * a.v[i];
                }
                break;
            }
            case Op::Scale: {
                Tensor& g0 = ensure(n.in0);
                for (std::size_t i = 0; i < g.size(); ++i) g0.v[i] += g.v[i] * n.scalar_arg;
                break;
            }
            case Op::AddConst: {
                Tensor& g0 = ensure(n.in0);
                for (std::size_t i = 0; i < g.size(); ++i) g0.v[i] += g.v[i];
                break;
            }
            case Op::MatMul: {
                const Tensor& a = nodes_[n.in0].value;
                const Tensor& b = nodes_[n.in1].value;
                if (nodes_[n.in0].needs_grad) {
                    Tensor& g0 = ensure(n.in0);  // G * B^T
                    for (int i = 0; i < a.rows; ++i)
                        for (int k = 0; k < a.cols; ++k) {
                            double s = 0.0;
                            for (int j = 0; j < b.cols; ++j) s += g.at(i, j) * b.at(k, j);
                            g0.at(i, k) += s;
                        }
                }
                if (nodes_[n.in1].needs_grad) {
                    Tensor& g1 = ensure(n.in1);  // A^T * G
                    for (int k = 0; k < b.rows; ++k)
                        for (int j = 0; j < b.cols; ++j) {
                            double s = 0.0;
                            for (int i = 0; i < a.rows; ++i) s += a.at(i, k) * g.at(i, j);
                            g1.at(k, j) += s;
                        }
                }
                break;
            }
            case Op::Relu: {
                const Tensor& x = nodes_[n.in0].value;
                Tensor& g0 = ensure(n.in0);
                for (std::size_t i = 0; i < g.size(); ++i)
                    if (x.v[i] > 0.0) g0.v[i] += g.v[i];  // subgradient 0 at 0
                break;
            }
            case Op::Tanh: {
                Tensor& g0 = ensure(n.in0);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double y = n.value.v[i];
                    g0.v[i] += g.v[i] * (1.0 - y * y);
                }
                break;
            }
            case Op::Sqrt: {
                Tensor& g0 = ensure(n.in0);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double y = n.value.v[i];
                    if (y > 1e-12) g0.v[i] += g.v[i] * 0.5 / y;
                }
                break;
            }
            case Op::Concat0: {
                const Tensor& a = nodes_[n.in0].value;
                if (nodes_[n.in0].needs_grad) {
                    Tensor& g0 = ensure(n.in0);
                    for (std::size_t i = 0; i < a.size(); ++i) g0.v[i] += g.v[i];
                }
                if (nodes_[n.in1].needs_grad) {
                    Tensor& g1 = ensure(n.in1);
                    for (std::size_t i = 0; i < g1.size(); ++i)
                        g1.v[i] += g.v[a.size() + i];
                }
                break;
            }
            case Op::Concat1: {
                const Tensor& a = nodes_[n.in0].value;
                const Tensor& b = nodes_[n.in1].value;
                if (nodes_[n.in0].needs_grad) {
                    Tensor& g0 = ensure(n.in0);
                    for (int i = 0; i < a.rows; ++i)
                        for (int j = 0; j < a.cols; ++j) g0.at(i, j) += g.at(i, j);
                }
                if (nodes_[n.in1].needs_grad) {
                    Tensor& g1 = ensure(n.in1);
                    for (int i = 0; i < b.rows; ++i)
                        for (int j = 0; j < b.cols; ++j) g1.at(i, j) += g.at(i, a.cols + j);
                }
                break;
            }
            case Op::Reshape: {
                Tensor& g0 = ensure(n.in0);
                for (std::size_t i = 0; i < g.size(); ++i) g0.v[i] += g.v[i];
                break;
            }
            case Op::ReduceSum: {
                Tensor& g0 = ensure(n.in0);
                for (double& x : g0.v) x += g.v[0];
                break;
            }
            case Op::ReduceMin1:
            case Op::ReduceMax1: {
                Tensor& g0 = ensure(n.in0);
                for (int i = 0; i < n.value.rows; ++i)
                    g0.at(i, n.aux[i]) += g.at(i, 0);
                break;
            }
            case Op::ReduceMin0:
            case Op::ReduceMax0: {
                Tensor& g0 = ensure(n.in0);
                for (int j = 0; j < n.value.cols; ++j)
                    g0.at(n.aux[j], j) += g.at(0, j);
                break;
            }
            case Op::GatherRows: {
                Tensor& g0 = ensure(n.in0);
                for (std::size_t i = 0; i < n.aux.size(); ++i)
                    for (int j = 0; j < g.cols; ++j)
                        g0.at(n.aux[i], j) += g.at(static_cast<int>(i), j);
                break;
            }
            case Op::SqDist: {
                const Tensor& a = nodes_[n.in0].value;
                const Tensor& b = nodes_[n.in1].value;
                bool ga = nodes_[n.in0].needs_grad;
                bool gb = nodes_[n.in1].needs_grad;
                Tensor* g0 = ga ? &ensure(n.in0) : nullptr;
                Tensor* g1 = gb ? &ensure(n.in1) : nullptr;
                for (int i = 0; i < a.rows; ++i)
                    for (int j = 0; j < b.rows; ++j) {
                        double w = g.at(i, j);
                        if (w == 0.0) continue;
                        for (int k = 0; k < a.cols; ++k) {
                            double d = 2.0 * (a.at(i, k) - b.at(j, k)) * w;
                            if (g0) g0->at(i, k) += d;
                            if (g1) g1->at(j, k) -= d;
                        }
                    }
                break;
            }
        }
    }
}

std::uint64_t checksum(const Tensor& t) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    mix(&t.rows, sizeof(t.rows));
    mix(&t.cols, sizeof(t.cols));
    if (!t.v.empty()) mix(t.v.data(), t.v.size() * sizeof(double));
    return h;
}

}  // namespace mvs::ad
