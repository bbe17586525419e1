#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "avth/error.hpp"

namespace avth::nn {

// Dense row-major double tensor.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        v.assign(count(shape), fill);
    }
    static Tensor from(std::vector<int> s, std::vector<double> data) {
        Tensor t;
        t.shape = std::move(s);
        t.v = std::move(data);
        if (t.v.size() != count(t.shape)) throw ShapeError("tensor data does not match shape");
        return t;
    }
    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }
    size_t size() const { return v.size(); }
    int dim(size_t i) const { return shape.at(i); }
    double& operator[](size_t i) { return v[i]; }
    double operator[](size_t i) const { return v[i]; }
};

// Reverse-mode autodiff node. Graphs are built by the free functions below;
// backward() seeds a scalar root and accumulates into each node's grad.
struct Node {
    Tensor val;
    Tensor grad;  // allocated lazily by backward()
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = true;

    Tensor& g() {
        if (grad.v.empty()) grad = Tensor(val.shape);
        return grad;
    }
};

using Var = std::shared_ptr<Node>;

Var leaf(Tensor t);        // trainable / differentiable input
Var constant(Tensor t);    // no gradient flows into it
void backward(const Var& root);      // root must be scalar
void zero_grad(const Var& v);

// Elementwise & scalar
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var tanh_(Var a);
Var sigmoid_(Var a);
Var log_(Var a);
Var sqrt_(Var a);
Var abs_(Var a);
Var clamp_(Var a, double lo, double hi);  // pass-through gradient inside range

// Reductions & linear algebra
Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
Var matmul(Var a, Var b);     // [m,k] x [k,n]
Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T -> [m,n]
Var softmax_rows(Var a);      // 2-D, softmax over the last axis
Var l2_normalize(Var a);      // flat vector -> unit vector
Var transpose2d(Var a);       // [m,n] -> [n,m]
Var add_rowvec(Var a, Var b); // [m,n] + [n] per row
Var global_avgpool(Var a);    // [C,H,W] -> [1,C]

// Shape & structure
Var reshape(Var a, std::vector<int> shape);
Var concat_ch(Var a, Var b);                       // [C1,H,W] + [C2,H,W]
Var crop_hw(Var a, int y0, int x0, int h, int w);  // [C,H,W]
Var sub_colmean(Var a);                            // [T,D]: remove per-column mean
Var avgpool_rows2(Var a);                          // [T,D] -> [T/2,D]
Var adaptive_avgpool(Var a, int oh, int ow);       // [C,H,W] -> [C,oh,ow]

// Convolutions. conv2d weight is [Cout,Cin,kh,kw]; conv_transpose2d weight is
// [Cin,Cout,kh,kw] and produces H_out = (H-1)*stride - 2*pad + k.
Var conv2d(Var x, Var w, Var b, int stride, int pad);
Var conv_transpose2d(Var x, Var w, Var b, int stride, int pad);

}  // namespace avth::nn
