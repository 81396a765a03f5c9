// SPDX-License-Identifier: Apache-2.0
//
// Deterministic SIMT interpreter for VPTX modules: the emulated device.
//
// Execution model (pinned for bit-exact reproducibility):
//   - blocks run sequentially in lexicographic ctaid order: (x, y, z)
//     tuples compared left to right
//   - within a block, threads run cooperatively in linear-tid order
//     (tid.x fastest); each runs until it hits bar.sync, exits, or traps
//   - bar.sync is a counting rendezvous: a round where every live thread
//     waits at a barrier releases all of them; a round where some thread
//     has exited while others wait traps with BarrierDivergence
//   - shared memory is zero-initialized per block; registers start at zero
//   - integer overflow wraps (two's complement); int division by zero traps;
//     INT_MIN / -1 wraps, INT_MIN % -1 is 0
//   - floating point is IEEE-754 binary32/64, round-to-nearest-even, no
//     contraction except the explicit fma instruction
//   - float->int cvt truncates toward zero and saturates; NaN converts to 0
//   - every ld/st is checked against the global allocation table or the
//     block's shared extent; the first trap aborts the launch
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "gridjit/errors.hpp"
#include "gridjit/types.hpp"
#include "gridjit/vptx.hpp"

namespace gridjit {

struct GridConfig {
    std::array<std::uint32_t, 3> grid{1, 1, 1};
    std::array<std::uint32_t, 3> block{1, 1, 1};
    std::uint64_t shared_bytes_extra = 0;  // dynamic shared memory beyond static decls

    std::uint64_t blocks() const {
        return std::uint64_t(grid[0]) * grid[1] * grid[2];
    }
    std::uint64_t threads_per_block() const {
        return std::uint64_t(block[0]) * block[1] * block[2];
    }
};

struct DeviceCaps {
    std::uint32_t max_block_threads = 1024;
    std::uint64_t max_shared_bytes = 48 * 1024;
};

struct TrapInfo {
    enum class Kind : std::uint8_t {
        GlobalOutOfBounds,
        SharedOutOfBounds,
        UseOfFreedMemory,
        DivisionByZero,
        BarrierDivergence,
        ExplicitTrap,
    };

    Kind kind = Kind::ExplicitTrap;
    std::array<std::uint32_t, 3> thread{1, 1, 1};  // 1-indexed, source-language convention
    std::array<std::uint32_t, 3> block{1, 1, 1};   // 1-indexed
    std::size_t instr_index = 0;
    std::int64_t code = 0;  // ExplicitTrap payload

    static std::string_view kind_name(Kind k) {
        switch (k) {
            case Kind::GlobalOutOfBounds: return "GlobalOutOfBounds";
            case Kind::SharedOutOfBounds: return "SharedOutOfBounds";
            case Kind::UseOfFreedMemory: return "UseOfFreedMemory";
            case Kind::DivisionByZero: return "DivisionByZero";
            case Kind::BarrierDivergence: return "BarrierDivergence";
            case Kind::ExplicitTrap: return "ExplicitTrap";
        }
        return "?";
    }

    std::string to_string() const {
        std::string s{kind_name(kind)};
        s += " at block (" + std::to_string(block[0]) + "," + std::to_string(block[1]) + "," +
             std::to_string(block[2]) + ") thread (" + std::to_string(thread[0]) + "," +
             std::to_string(thread[1]) + "," + std::to_string(thread[2]) + ") instruction " +
             std::to_string(instr_index);
        if (kind == Kind::ExplicitTrap) s += " code " + std::to_string(code);
        return s;
    }
};

struct LaunchResult {
    std::optional<TrapInfo> trap;
    bool ok() const { return !trap.has_value(); }
};

// Flat 64-bit global address space backed by an allocation table. Address 0
// is reserved invalid; the bump pointer starts at 4096 and never reuses
// space, so freed ranges stay identifiable as UseOfFreedMemory.
class GlobalMemory {
  public:
    static constexpr std::uint64_t kBase = 4096;
    static constexpr std::uint64_t kAlign = 256;

    std::uint64_t alloc(std::uint64_t bytes) {
        std::uint64_t base = bump_;
        allocs_.emplace(base, Allocation{std::vector<std::byte>(bytes), true});
        bump_ += bytes == 0 ? kAlign : (bytes + kAlign - 1) / kAlign * kAlign;
        return base;
    }

    // False when the base is unknown or already freed.
    bool free(std::uint64_t base) {
        auto it = allocs_.find(base);
        if (it == allocs_.end() || !it->second.live) return false;
        it->second.live = false;
        return true;
    }

    bool is_live(std::uint64_t base) const {
        auto it = allocs_.find(base);
        return it != allocs_.end() && it->second.live;
    }

    std::uint64_t size_of(std::uint64_t base) const {
        auto it = allocs_.find(base);
        return it == allocs_.end() ? 0 : it->second.bytes.size();
    }

    enum class Access : std::uint8_t { Ok, OutOfBounds, Freed };

    Access check(std::uint64_t addr, std::uint64_t len) const {
        auto it = containing(addr, len);
        if (it == allocs_.end()) return Access::OutOfBounds;
        return it->second.live ? Access::Ok : Access::Freed;
    }

    void read(std::uint64_t addr, void* out, std::uint64_t len) const {
        auto it = containing(addr, len);
        if (it == allocs_.end() || !it->second.live) throw Error("internal: unchecked global read");
        std::memcpy(out, it->second.bytes.data() + (addr - it->first), len);
    }

    void write(std::uint64_t addr, const void* data, std::uint64_t len) {
        auto cit = containing(addr, len);
        if (cit == allocs_.end() || !cit->second.live) throw Error("internal: unchecked global write");
        auto it = allocs_.find(cit->first);
        std::memcpy(it->second.bytes.data() + (addr - it->first), data, len);
    }

  private:
    struct Allocation {
        std::vector<std::byte> bytes;
        bool live = true;
    };

    using Table = std::map<std::uint64_t, Allocation>;

    Table::const_iterator containing(std::uint64_t addr, std::uint64_t len) const {
        if (allocs_.empty() || addr < kBase) return allocs_.end();
        auto it = allocs_.upper_bound(addr);
        if (it == allocs_.begin()) return allocs_.end();
        --it;
        std::uint64_t base = it->first;
        std::uint64_t size = it->second.bytes.size();
        if (addr < base || addr + len > base + size || addr + len < addr) return allocs_.end();
        return it;
    }

    Table allocs_;
    std::uint64_t bump_ = kBase;
};

// A launch-time scalar argument or device pointer.
struct ArgValue {
    enum class Kind : std::uint8_t { I32, I64, F32, F64, Ptr };
    Kind kind = Kind::I32;
    std::int32_t i32 = 0;
    std::int64_t i64 = 0;
    float f32 = 0;
    double f64 = 0;
    std::uint64_t ptr = 0;

    static ArgValue of_i32(std::int32_t v) { ArgValue a; a.kind = Kind::I32; a.i32 = v; return a; }
    static ArgValue of_i64(std::int64_t v) { ArgValue a; a.kind = Kind::I64; a.i64 = v; return a; }
    static ArgValue of_f32(float v) { ArgValue a; a.kind = Kind::F32; a.f32 = v; return a; }
    static ArgValue of_f64(double v) { ArgValue a; a.kind = Kind::F64; a.f64 = v; return a; }
    static ArgValue of_ptr(std::uint64_t base) { ArgValue a; a.kind = Kind::Ptr; a.ptr = base; return a; }
};

enum class ThreadStatus : std::uint8_t { Runnable, AtBarrier, Exited, Trapped };

namespace emu_detail {

// One register slot; the declared type selects the active member.
union RegValue {
    std::int32_t i32;
    std::int64_t i64;
    float f32;
    double f64;
    bool pred;
};

}  // namespace emu_detail

// A kernel prepared for one launch: resolved register/label/param tables.
// Shared by all threads of the launch; immutable during execution.
class KernelImage {
  public:
    KernelImage(const vptx::Module& module, std::string_view kernel_name, const GridConfig& cfg,
                const std::vector<ArgValue>& args, const DeviceCaps& caps = {}) {
        const vptx::Kernel* k = module.find_kernel(kernel_name);
        if (k == nullptr) throw FunctionNotFound(std::string(kernel_name));
        kernel_ = k;
        cfg_ = cfg;

        for (int i = 0; i < 3; ++i)
            if (cfg.grid[i] == 0 || cfg.block[i] == 0)
                throw LaunchConfigError("grid/block dimensions must be >= 1");
        if (cfg.threads_per_block() > caps.max_block_threads)
            throw LaunchConfigError("block of " + std::to_string(cfg.threads_per_block()) +
                                    " threads exceeds the cap of " + std::to_string(caps.max_block_threads));

        if (args.size() != k->params.size())
            throw ArgumentMismatch("kernel '" + k->name + "' takes " + std::to_string(k->params.size()) +
                                   " argument(s), got " + std::to_string(args.size()));
        for (std::size_t i = 0; i < args.size(); ++i) {
            const vptx::Param& p = k->params[i];
            bool ok;
            if (p.kind == vptx::ParamKind::Pointer) {
                ok = args[i].kind == ArgValue::Kind::Ptr;
            } else {
                switch (p.type) {
                    case ScalarType::I32: ok = args[i].kind == ArgValue::Kind::I32; break;
                    case ScalarType::I64: ok = args[i].kind == ArgValue::Kind::I64; break;
                    case ScalarType::F32: ok = args[i].kind == ArgValue::Kind::F32; break;
                    case ScalarType::F64: ok = args[i].kind == ArgValue::Kind::F64; break;
                    default: ok = false;
                }
            }
            if (!ok)
                throw ArgumentMismatch("argument " + std::to_string(i + 1) + " does not match parameter '" +
                                       p.name + "' of type " + p.type_text());
            params_.emplace(p.name, args[i]);
        }

        for (std::size_t i = 0; i < k->regs.size(); ++i) {
            reg_index_.emplace(k->regs[i].name, i);
            reg_types_.push_back(k->regs[i].type);
        }
        for (std::size_t i = 0; i < k->body.size(); ++i)
            if (k->body[i].op == vptx::Opcode::Label) labels_.emplace(k->body[i].label, i);

        std::uint64_t offset = 0;
        for (const auto& s : k->shared) {
            std::uint64_t align = scalar_size(s.elem);
            offset = (offset + align - 1) / align * align;
            shared_offsets_.emplace(s.name, offset);
            offset += std::uint64_t(s.count) * scalar_size(s.elem);
        }
        shared_bytes_ = offset + cfg.shared_bytes_extra;
        if (shared_bytes_ > caps.max_shared_bytes)
            throw LaunchConfigError("shared memory of " + std::to_string(shared_bytes_) +
                                    " bytes exceeds the cap of " + std::to_string(caps.max_shared_bytes));
    }

    const vptx::Kernel& kernel() const { return *kernel_; }
    const GridConfig& config() const { return cfg_; }
    std::size_t reg_count() const { return reg_types_.size(); }
    ScalarType reg_type(std::size_t i) const { return reg_types_[i]; }
    std::uint64_t shared_bytes() const { return shared_bytes_; }

    std::size_t reg_of(const std::string& name) const {
        auto it = reg_index_.find(name);
        if (it == reg_index_.end()) throw Error("internal: undeclared register '" + name + "' (unvalidated module?)");
        return it->second;
    }

    std::size_t label_pc(const std::string& name) const {
        auto it = labels_.find(name);
        if (it == labels_.end()) throw Error("internal: undefined label '" + name + "' (unvalidated module?)");
        return it->second;
    }

    const ArgValue& param(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw Error("internal: unknown parameter '" + name + "'");
        return it->second;
    }

    std::optional<std::uint64_t> shared_offset(const std::string& name) const {
        auto it = shared_offsets_.find(name);
        if (it == shared_offsets_.end()) return std::nullopt;
        return it->second;
    }

  private:
    const vptx::Kernel* kernel_ = nullptr;
    GridConfig cfg_;
    std::map<std::string, ArgValue> params_;
    std::map<std::string, std::size_t> reg_index_;
    std::vector<ScalarType> reg_types_;
    std::map<std::string, std::size_t> labels_;
    std::map<std::string, std::uint64_t> shared_offsets_;
    std::uint64_t shared_bytes_ = 0;
};

struct ThreadState {
    std::array<std::uint32_t, 3> tid{0, 0, 0};    // 0-indexed ISA coordinates
    std::array<std::uint32_t, 3> ctaid{0, 0, 0};  // 0-indexed
    std::vector<emu_detail::RegValue> regs;       // zero-initialized, typed per declaration
    std::size_t pc = 0;
    ThreadStatus status = ThreadStatus::Runnable;
    std::size_t barrier_instr = 0;  // pc of the bar.sync this thread waits at

    std::array<std::uint32_t, 3> tid_1based() const { return {tid[0] + 1, tid[1] + 1, tid[2] + 1}; }
    std::array<std::uint32_t, 3> ctaid_1based() const { return {ctaid[0] + 1, ctaid[1] + 1, ctaid[2] + 1}; }
};

inline ThreadState make_thread(const KernelImage& image, std::array<std::uint32_t, 3> ctaid,
                               std::array<std::uint32_t, 3> tid) {
    ThreadState t;
    t.tid = tid;
    t.ctaid = ctaid;
    t.regs.assign(image.reg_count(), emu_detail::RegValue{});
    for (auto& r : t.regs) std::memset(&r, 0, sizeof(r));
    return t;
}

namespace emu_detail {

inline TrapInfo make_trap(TrapInfo::Kind kind, const ThreadState& t, std::size_t instr_index,
                          std::int64_t code = 0) {
    TrapInfo info;
    info.kind = kind;
    info.thread = t.tid_1based();
    info.block = t.ctaid_1based();
    info.instr_index = instr_index;
    info.code = code;
    return info;
}

// Wrapping (two's complement) integer helpers.
template <typename T>
T wrap_add(T a, T b) {
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(a) + static_cast<U>(b));
}
template <typename T>
T wrap_sub(T a, T b) {
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(a) - static_cast<U>(b));
}
template <typename T>
T wrap_mul(T a, T b) {
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(static_cast<U>(a) * static_cast<U>(b));
}
template <typename T>
T wrap_neg(T a) {
    using U = std::make_unsigned_t<T>;
    return static_cast<T>(U(0) - static_cast<U>(a));
}
template <typename T>
T wrap_div(T a, T b) {  // caller has excluded b == 0
    if (a == std::numeric_limits<T>::min() && b == T(-1)) return a;
    return static_cast<T>(a / b);
}
template <typename T>
T wrap_rem(T a, T b) {  // caller has excluded b == 0
    if (a == std::numeric_limits<T>::min() && b == T(-1)) return 0;
    return static_cast<T>(a % b);
}

// Saturating truncation toward zero; NaN -> 0.
template <typename I, typename F>
I float_to_int(F v) {
    if (std::isnan(v)) return 0;
    constexpr F lo = static_cast<F>(std::numeric_limits<I>::min());
    // max + 1 is exact in both float widths for both int widths.
    constexpr F hi_plus_1 = static_cast<F>(std::numeric_limits<I>::max()) + F(1);
    if (v <= lo) return std::numeric_limits<I>::min();
    if (v >= hi_plus_1) return std::numeric_limits<I>::max();
    return static_cast<I>(v);
}

}  // namespace emu_detail

// Executes exactly one instruction of `t`. `shared` is the block's shared
// segment. Returns a trap value instead of throwing for all kernel-level
// faults; throws only on internal invariant violations (unvalidated input).
inline std::optional<TrapInfo> step_thread(ThreadState& t, const KernelImage& image, GlobalMemory& mem,
                                           std::vector<std::byte>& shared) {
    using namespace emu_detail;
    using vptx::Opcode;
    if (t.status != ThreadStatus::Runnable) throw Error("internal: stepping a non-runnable thread");
    const auto& body = image.kernel().body;
    if (t.pc >= body.size()) throw Error("internal: program counter past the end (unvalidated module?)");
    const vptx::Instr& in = body[t.pc];
    const std::size_t here = t.pc;

    auto reg = [&](const vptx::Operand& o) -> RegValue& { return t.regs[image.reg_of(o.name)]; };

    auto special_value = [&](const vptx::Special& sp) -> std::int32_t {
        const GridConfig& cfg = image.config();
        switch (sp.family) {
            case vptx::Special::Family::Tid: return static_cast<std::int32_t>(t.tid[sp.axis]);
            case vptx::Special::Family::Ctaid: return static_cast<std::int32_t>(t.ctaid[sp.axis]);
            case vptx::Special::Family::Ntid: return static_cast<std::int32_t>(cfg.block[sp.axis]);
            case vptx::Special::Family::Nctaid: return static_cast<std::int32_t>(cfg.grid[sp.axis]);
        }
        return 0;
    };

    switch (in.op) {
        case Opcode::Label:
            ++t.pc;
            return std::nullopt;
        case Opcode::Ret:
            t.status = ThreadStatus::Exited;
            return std::nullopt;
        case Opcode::Trap:
            t.status = ThreadStatus::Trapped;
            return make_trap(TrapInfo::Kind::ExplicitTrap, t, here, in.trap_code);
        case Opcode::BarSync:
            t.status = ThreadStatus::AtBarrier;
            t.barrier_instr = here;
            ++t.pc;
            return std::nullopt;
        case Opcode::Bra:
            t.pc = image.label_pc(in.label);
            return std::nullopt;
        case Opcode::BraPred:
            t.pc = reg(in.ops[0]).pred ? image.label_pc(in.label) : t.pc + 1;
            return std::nullopt;
        case Opcode::Mov: {
            RegValue& dst = reg(in.ops[0]);
            const vptx::Operand& src = in.ops[1];
            switch (src.kind) {
                case vptx::Operand::Kind::Reg:
                    dst = reg(src);
                    break;
                case vptx::Operand::Kind::ImmInt:
                    if (in.type == ScalarType::I32) dst.i32 = static_cast<std::int32_t>(src.ival);
                    else dst.i64 = src.ival;
                    break;
                case vptx::Operand::Kind::ImmFloat:
                    if (in.type == ScalarType::F32) dst.f32 = static_cast<float>(src.fval);
                    else dst.f64 = src.fval;
                    break;
                case vptx::Operand::Kind::Special:
                    dst.i32 = special_value(src.spec);
                    break;
                case vptx::Operand::Kind::Symbol: {
                    if (auto off = image.shared_offset(src.name)) {
                        dst.i64 = static_cast<std::int64_t>(*off);
                        break;
                    }
                    const ArgValue& a = image.param(src.name);
                    switch (a.kind) {
                        case ArgValue::Kind::I32: dst.i32 = a.i32; break;
                        case ArgValue::Kind::I64: dst.i64 = a.i64; break;
                        case ArgValue::Kind::F32: dst.f32 = a.f32; break;
                        case ArgValue::Kind::F64: dst.f64 = a.f64; break;
                        case ArgValue::Kind::Ptr: dst.i64 = static_cast<std::int64_t>(a.ptr); break;
                    }
                    break;
                }
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Add:
        case Opcode::Sub:
        case Opcode::Mul: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& a = reg(in.ops[1]);
            const RegValue& b = reg(in.ops[2]);
            switch (in.type) {
                case ScalarType::I32:
                    d.i32 = in.op == Opcode::Add   ? wrap_add(a.i32, b.i32)
                            : in.op == Opcode::Sub ? wrap_sub(a.i32, b.i32)
                                                   : wrap_mul(a.i32, b.i32);
                    break;
                case ScalarType::I64:
                    d.i64 = in.op == Opcode::Add   ? wrap_add(a.i64, b.i64)
                            : in.op == Opcode::Sub ? wrap_sub(a.i64, b.i64)
                                                   : wrap_mul(a.i64, b.i64);
                    break;
                case ScalarType::F32:
                    d.f32 = in.op == Opcode::Add ? a.f32 + b.f32 : in.op == Opcode::Sub ? a.f32 - b.f32 : a.f32 * b.f32;
                    break;
                case ScalarType::F64:
                    d.f64 = in.op == Opcode::Add ? a.f64 + b.f64 : in.op == Opcode::Sub ? a.f64 - b.f64 : a.f64 * b.f64;
                    break;
                default:
                    throw Error("internal: arithmetic on pred");
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Div:
        case Opcode::Rem: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& a = reg(in.ops[1]);
            const RegValue& b = reg(in.ops[2]);
            switch (in.type) {
                case ScalarType::I32:
                    if (b.i32 == 0) {
                        t.status = ThreadStatus::Trapped;
                        return make_trap(TrapInfo::Kind::DivisionByZero, t, here);
                    }
                    d.i32 = in.op == Opcode::Div ? wrap_div(a.i32, b.i32) : wrap_rem(a.i32, b.i32);
                    break;
                case ScalarType::I64:
                    if (b.i64 == 0) {
                        t.status = ThreadStatus::Trapped;
                        return make_trap(TrapInfo::Kind::DivisionByZero, t, here);
                    }
                    d.i64 = in.op == Opcode::Div ? wrap_div(a.i64, b.i64) : wrap_rem(a.i64, b.i64);
                    break;
                case ScalarType::F32:
                    d.f32 = a.f32 / b.f32;  // IEEE: inf/NaN, never traps
                    break;
                case ScalarType::F64:
                    d.f64 = a.f64 / b.f64;
                    break;
                default:
                    throw Error("internal: arithmetic on pred");
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Neg: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& a = reg(in.ops[1]);
            switch (in.type) {
                case ScalarType::I32: d.i32 = wrap_neg(a.i32); break;
                case ScalarType::I64: d.i64 = wrap_neg(a.i64); break;
                case ScalarType::F32: d.f32 = -a.f32; break;
                case ScalarType::F64: d.f64 = -a.f64; break;
                default: throw Error("internal: neg on pred");
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::And:
        case Opcode::Or:
        case Opcode::Xor: {
            bool a = reg(in.ops[1]).pred;
            bool b = reg(in.ops[2]).pred;
            reg(in.ops[0]).pred = in.op == Opcode::And ? (a && b) : in.op == Opcode::Or ? (a || b) : (a != b);
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Not:
            reg(in.ops[0]).pred = !reg(in.ops[1]).pred;
            ++t.pc;
            return std::nullopt;
        case Opcode::Setp: {
            const RegValue& a = reg(in.ops[1]);
            const RegValue& b = reg(in.ops[2]);
            auto cmp = [&](auto x, auto y) -> bool {
                switch (in.cmp) {
                    case vptx::CmpOp::Eq: return x == y;
                    case vptx::CmpOp::Ne: return x != y;
                    case vptx::CmpOp::Lt: return x < y;
                    case vptx::CmpOp::Le: return x <= y;
                    case vptx::CmpOp::Gt: return x > y;
                    case vptx::CmpOp::Ge: return x >= y;
                }
                return false;
            };
            bool r = false;
            switch (in.type) {
                case ScalarType::I32: r = cmp(a.i32, b.i32); break;
                case ScalarType::I64: r = cmp(a.i64, b.i64); break;
                case ScalarType::F32: r = cmp(a.f32, b.f32); break;
                case ScalarType::F64: r = cmp(a.f64, b.f64); break;
                default: throw Error("internal: setp on pred");
            }
            reg(in.ops[0]).pred = r;
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Cvt: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& s = reg(in.ops[1]);
            auto src_as_i64 = [&]() -> std::int64_t {
                return in.type2 == ScalarType::I32 ? std::int64_t(s.i32) : s.i64;
            };
            switch (in.type) {
                case ScalarType::I32:
                    if (in.type2 == ScalarType::I64) d.i32 = static_cast<std::int32_t>(static_cast<std::uint64_t>(s.i64));
                    else if (in.type2 == ScalarType::F32) d.i32 = emu_detail::float_to_int<std::int32_t>(s.f32);
                    else d.i32 = emu_detail::float_to_int<std::int32_t>(s.f64);
                    break;
                case ScalarType::I64:
                    if (in.type2 == ScalarType::I32) d.i64 = s.i32;  // sign extend
                    else if (in.type2 == ScalarType::F32) d.i64 = emu_detail::float_to_int<std::int64_t>(s.f32);
                    else d.i64 = emu_detail::float_to_int<std::int64_t>(s.f64);
                    break;
                case ScalarType::F32:
                    if (in.type2 == ScalarType::F64) d.f32 = static_cast<float>(s.f64);
                    else d.f32 = static_cast<float>(src_as_i64());
                    break;
                case ScalarType::F64:
                    if (in.type2 == ScalarType::F32) d.f64 = static_cast<double>(s.f32);
                    else d.f64 = static_cast<double>(src_as_i64());
                    break;
                default:
                    throw Error("internal: cvt to pred");
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Ld:
        case Opcode::St: {
            const bool is_load = in.op == Opcode::Ld;
            const vptx::Operand& addr_op = is_load ? in.ops[1] : in.ops[0];
            const vptx::Operand& data_op = is_load ? in.ops[0] : in.ops[1];
            std::uint64_t addr = static_cast<std::uint64_t>(reg(addr_op).i64);
            std::uint64_t len = scalar_size(in.type);
            unsigned char buf[8];

            if (in.space == vptx::Space::Shared) {
                if (addr + len > shared.size() || addr + len < addr) {
                    t.status = ThreadStatus::Trapped;
                    return make_trap(TrapInfo::Kind::SharedOutOfBounds, t, here);
                }
                if (is_load) std::memcpy(buf, shared.data() + addr, len);
            } else {
                GlobalMemory::Access access = mem.check(addr, len);
                if (access != GlobalMemory::Access::Ok) {
                    t.status = ThreadStatus::Trapped;
                    return make_trap(access == GlobalMemory::Access::Freed ? TrapInfo::Kind::UseOfFreedMemory
                                                                           : TrapInfo::Kind::GlobalOutOfBounds,
                                     t, here);
                }
                if (is_load) mem.read(addr, buf, len);
            }

            RegValue& data = reg(data_op);
            if (is_load) {
                switch (in.type) {
                    case ScalarType::I32: std::memcpy(&data.i32, buf, 4); break;
                    case ScalarType::I64: std::memcpy(&data.i64, buf, 8); break;
                    case ScalarType::F32: std::memcpy(&data.f32, buf, 4); break;
                    case ScalarType::F64: std::memcpy(&data.f64, buf, 8); break;
                    default: throw Error("internal: ld of pred");
                }
            } else {
                switch (in.type) {
                    case ScalarType::I32: std::memcpy(buf, &data.i32, 4); break;
                    case ScalarType::I64: std::memcpy(buf, &data.i64, 8); break;
                    case ScalarType::F32: std::memcpy(buf, &data.f32, 4); break;
                    case ScalarType::F64: std::memcpy(buf, &data.f64, 8); break;
                    default: throw Error("internal: st of pred");
                }
                if (in.space == vptx::Space::Shared) std::memcpy(shared.data() + addr, buf, len);
                else mem.write(addr, buf, len);
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Sqrt:
        case Opcode::Sin:
        case Opcode::Cos:
        case Opcode::Exp:
        case Opcode::Log: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& a = reg(in.ops[1]);
            if (in.type == ScalarType::F32) {
                float x = a.f32;
                d.f32 = in.op == Opcode::Sqrt  ? std::sqrt(x)
                        : in.op == Opcode::Sin ? std::sin(x)
                        : in.op == Opcode::Cos ? std::cos(x)
                        : in.op == Opcode::Exp ? std::exp(x)
                                               : std::log(x);
            } else {
                double x = a.f64;
                d.f64 = in.op == Opcode::Sqrt  ? std::sqrt(x)
                        : in.op == Opcode::Sin ? std::sin(x)
                        : in.op == Opcode::Cos ? std::cos(x)
                        : in.op == Opcode::Exp ? std::exp(x)
                                               : std::log(x);
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Abs: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& a = reg(in.ops[1]);
            switch (in.type) {
                case ScalarType::I32: d.i32 = a.i32 == std::numeric_limits<std::int32_t>::min() ? a.i32 : std::abs(a.i32); break;
                case ScalarType::I64: d.i64 = a.i64 == std::numeric_limits<std::int64_t>::min() ? a.i64 : std::abs(a.i64); break;
                case ScalarType::F32: d.f32 = std::fabs(a.f32); break;
                case ScalarType::F64: d.f64 = std::fabs(a.f64); break;
                default: throw Error("internal: abs on pred");
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Min:
        case Opcode::Max: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& a = reg(in.ops[1]);
            const RegValue& b = reg(in.ops[2]);
            const bool mn = in.op == Opcode::Min;
            switch (in.type) {
                case ScalarType::I32: d.i32 = mn ? std::min(a.i32, b.i32) : std::max(a.i32, b.i32); break;
                case ScalarType::I64: d.i64 = mn ? std::min(a.i64, b.i64) : std::max(a.i64, b.i64); break;
                // fmin/fmax: a single NaN operand yields the other operand.
                case ScalarType::F32: d.f32 = mn ? std::fmin(a.f32, b.f32) : std::fmax(a.f32, b.f32); break;
                case ScalarType::F64: d.f64 = mn ? std::fmin(a.f64, b.f64) : std::fmax(a.f64, b.f64); break;
                default: throw Error("internal: min/max on pred");
            }
            ++t.pc;
            return std::nullopt;
        }
        case Opcode::Fma: {
            RegValue& d = reg(in.ops[0]);
            const RegValue& a = reg(in.ops[1]);
            const RegValue& b = reg(in.ops[2]);
            const RegValue& c = reg(in.ops[3]);
            if (in.type == ScalarType::F32) d.f32 = std::fma(a.f32, b.f32, c.f32);
            else d.f64 = std::fma(a.f64, b.f64, c.f64);
            ++t.pc;
            return std::nullopt;
        }
    }
    throw Error("internal: unhandled opcode");
}

// Runs one launch to completion. Blocks execute sequentially in
// lexicographic ctaid order (x most significant); within a block, threads
// run in linear-tid order (x fastest) to the next barrier/exit/trap.
// Returns the first trap, or ok; never throws for kernel faults on
// validated modules.
inline LaunchResult run_kernel(const vptx::Module& module, std::string_view kernel_name, const GridConfig& cfg,
                               const std::vector<ArgValue>& args, GlobalMemory& mem,
                               const DeviceCaps& caps = {}) {
    KernelImage image(module, kernel_name, cfg, args, caps);

    for (std::uint32_t bx = 0; bx < cfg.grid[0]; ++bx)
        for (std::uint32_t by = 0; by < cfg.grid[1]; ++by)
            for (std::uint32_t bz = 0; bz < cfg.grid[2]; ++bz) {
                std::vector<std::byte> shared(image.shared_bytes(), std::byte{0});
                std::vector<ThreadState> threads;
                threads.reserve(cfg.threads_per_block());
                for (std::uint32_t tz = 0; tz < cfg.block[2]; ++tz)
                    for (std::uint32_t ty = 0; ty < cfg.block[1]; ++ty)
                        for (std::uint32_t tx = 0; tx < cfg.block[0]; ++tx)
                            threads.push_back(make_thread(image, {bx, by, bz}, {tx, ty, tz}));

                while (true) {
                    // One round: advance every runnable thread to its next
                    // rendezvous point.
                    for (auto& t : threads) {
                        while (t.status == ThreadStatus::Runnable) {
                            if (auto trap = step_thread(t, image, mem, shared)) return LaunchResult{*trap};
                        }
                    }
                    bool any_at_barrier = false;
                    bool any_exited = false;
                    for (const auto& t : threads) {
                        if (t.status == ThreadStatus::AtBarrier) any_at_barrier = true;
                        else if (t.status == ThreadStatus::Exited) any_exited = true;
                    }
                    if (!any_at_barrier) break;  // all exited
                    if (any_exited) {
                        // Some thread left while others wait: the barrier can
                        // never be satisfied.
                        for (const auto& t : threads) {
                            if (t.status == ThreadStatus::AtBarrier)
                                return LaunchResult{emu_detail::make_trap(TrapInfo::Kind::BarrierDivergence, t,
                                                                          t.barrier_instr)};
                        }
                        throw Error("internal: divergence without a waiting thread");
                    }
                    for (auto& t : threads)
                        if (t.status == ThreadStatus::AtBarrier) t.status = ThreadStatus::Runnable;
                }
            }
    return LaunchResult{};
}

}  // namespace gridjit
