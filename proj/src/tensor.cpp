#include "tvssl/tensor.hpp"

namespace tvssl {

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape* Tape::current() { return g_current_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_current_tape) { g_current_tape = &tape; }
TapeScope::~TapeScope() { g_current_tape = prev_; }

}  // namespace tvssl
