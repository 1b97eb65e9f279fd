#include "c2f/branch_trace.hpp"

namespace c2f {
namespace {
thread_local BranchTrace* g_current = nullptr;
}

BranchTrace::BranchTrace() : previous_(g_current) { g_current = this; }

BranchTrace::~BranchTrace() { g_current = previous_; }

BranchTrace* BranchTrace::current() { return g_current; }

void BranchTrace::fold(std::uint64_t word) {
  hash_ = (hash_ ^ word) * 0x100000001b3ull;
}

}  // namespace c2f
