#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mtc/errors.hpp"

namespace mtc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense 64-bit float tensor with an optional gradient buffer. Tensor is a
// cheap value handle over shared storage: copies alias the same data, which
// is what lets recorded backward closures reach the buffers they must
// accumulate into.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : impl_(std::make_shared<Impl>()) {
        impl_->shape = std::move(shape);
        impl_->data.assign(shape_numel(impl_->shape), fill);
    }

    static Tensor from_data(Shape shape, std::vector<double> values) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        const std::size_t n = shape_numel(shape);
        if (values.size() != n)
            throw ShapeError("from_data: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(shape));
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(values);
        return t;
    }

    static Tensor scalar(double v) { return from_data({1}, {v}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return check().shape; }
    std::size_t rank() const { return check().shape.size(); }
    std::size_t numel() const { return check().data.size(); }
    std::size_t extent(std::size_t axis) const {
        const auto& s = check().shape;
        if (axis >= s.size()) throw ShapeError("extent: axis out of range");
        return s[axis];
    }

    double* data() { return check().data.data(); }
    const double* data() const { return check().data.data(); }
    std::vector<double>& values() { return check().data; }
    const std::vector<double>& values() const { return check().data; }

    double item() const {
        if (numel() != 1) throw ShapeError("item: tensor has " +
                                           std::to_string(numel()) + " elements");
        return check().data[0];
    }

    double& at(std::size_t i) {
        if (i >= numel()) throw ShapeError("at: index out of range");
        return check().data[i];
    }
    double at(std::size_t i) const {
        if (i >= numel()) throw ShapeError("at: index out of range");
        return check().data[i];
    }

    bool requires_grad() const { return check().requires_grad; }
    Tensor& set_requires_grad(bool v) {
        check().requires_grad = v;
        return *this;
    }

    bool has_grad() const { return defined() && !impl_->grad.empty(); }

    // Lazily allocated, zero-filled on first touch.
    double* grad() {
        auto& im = check();
        if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
        return im.grad.data();
    }
    const std::vector<double>& grad_values() {
        auto& im = check();
        if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
        return im.grad;
    }

    void zero_grad() {
        auto& im = check();
        if (!im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
    }

    Tensor clone() const {
        const auto& im = check();
        Tensor t = from_data(im.shape, im.data);
        t.impl_->requires_grad = im.requires_grad;
        return t;
    }

    bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

private:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
    };

    Impl& check() const {
        if (!impl_) throw ValueError("operation on default-constructed tensor");
        return *impl_;
    }

    std::shared_ptr<Impl> impl_;

    friend class Tape;
};

// Records backward closures during forward execution and replays them in
// reverse. Execution order is a topological order by construction (an op is
// recorded after everything that produced its inputs), so the plain reverse
// is a valid gradient schedule.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
    }

    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
    // A second call on the same tape is an error: the closures have already
    // accumulated their contributions and rerunning would double-count.
    void backward(Tensor loss);

    // RAII activation: ops record onto the innermost active tape.
    class Scope {
    public:
        explicit Scope(Tape& t);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

private:
    std::vector<std::function<void()>> nodes_;
    bool used_ = false;
};

}  // namespace mtc
