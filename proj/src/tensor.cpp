#include "mtc/tensor.hpp"

namespace mtc {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) {
        if (e == 0) throw ShapeError("zero extent in shape " + shape_str(s));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

void Tape::backward(Tensor loss) {
    if (used_)
        throw ValueError("backward called twice on the same tape");
    used_ = true;
    if (loss.numel() != 1)
        throw ShapeError("backward expects a scalar loss, got shape " +
                         shape_str(loss.shape()));
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace mtc
