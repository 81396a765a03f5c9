// SPDX-License-Identifier: Apache-2.0
//
// One-call kernel launch: specialize + compile + load once per argument-type
// signature, then marshal direction-annotated host arrays, launch, and
// synchronize results. After the first call for a signature, every subsequent
// call performs only alloc/copy/launch/copy/free driver work; the compiled
// module and function handle come from the context's method cache.
//
// Directions: In uploads, Out downloads, InOut does both; an unwrapped array
// defaults to InOut. Scalars pass through by value. Device buffers live for
// exactly one call.
#pragma once

#include <concepts>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "gridjit/ast.hpp"
#include "gridjit/codegen.hpp"
#include "gridjit/driver.hpp"
#include "gridjit/errors.hpp"
#include "gridjit/specialize.hpp"
#include "gridjit/types.hpp"

#include <nlohmann/json.hpp>

namespace gridjit {

enum class Direction : std::uint8_t { In, Out, InOut };

constexpr std::string_view direction_name(Direction d) {
    switch (d) {
        case Direction::In: return "in";
        case Direction::Out: return "out";
        case Direction::InOut: return "inout";
    }
    return "?";
}

// A direction-annotated host value. Array arguments reference caller-owned
// contiguous storage (row-major-flattened); Out/InOut write back into it.
class KernelArg {
  public:
    template <typename T>
    KernelArg(std::vector<T>& host) : KernelArg(Direction::InOut, host) {}  // unwrapped default

    template <typename T>
        requires std::same_as<T, std::int32_t> || std::same_as<T, std::int64_t> ||
                 std::same_as<T, float> || std::same_as<T, double>
    KernelArg(T scalar) {
        kind_ = Kind::Scalar;
        type_ = scalar_type_of<T>();
        scalar_ = to_arg_value(scalar);
    }

    template <typename T>
    KernelArg(Direction dir, std::vector<T>& host) {
        kind_ = Kind::Array;
        dir_ = dir;
        type_ = scalar_type_of<T>();
        data_ = host.data();
        count_ = host.size();
    }

    bool is_array() const { return kind_ == Kind::Array; }
    Direction direction() const { return dir_; }
    ScalarType elem_type() const { return type_; }
    void* data() const { return data_; }
    std::size_t count() const { return count_; }
    std::uint64_t bytes() const { return count_ * scalar_size(type_); }
    const ArgValue& scalar() const { return scalar_; }

    ArgType arg_type() const {
        return kind_ == Kind::Array ? ArgType::array(type_) : ArgType::scalar(type_);
    }

  private:
    enum class Kind : std::uint8_t { Scalar, Array };

    template <typename T>
    static ScalarType scalar_type_of() {
        if constexpr (std::is_same_v<T, std::int32_t>) return ScalarType::I32;
        else if constexpr (std::is_same_v<T, std::int64_t>) return ScalarType::I64;
        else if constexpr (std::is_same_v<T, float>) return ScalarType::F32;
        else if constexpr (std::is_same_v<T, double>) return ScalarType::F64;
        else static_assert(sizeof(T) == 0, "kernel arguments must be i32/i64/f32/f64");
    }

    template <typename T>
    static ArgValue to_arg_value(T v) {
        if constexpr (std::is_same_v<T, std::int32_t>) return ArgValue::of_i32(v);
        else if constexpr (std::is_same_v<T, std::int64_t>) return ArgValue::of_i64(v);
        else if constexpr (std::is_same_v<T, float>) return ArgValue::of_f32(v);
        else return ArgValue::of_f64(v);
    }

    Kind kind_ = Kind::Scalar;
    Direction dir_ = Direction::InOut;
    ScalarType type_ = ScalarType::I32;
    void* data_ = nullptr;
    std::size_t count_ = 0;
    ArgValue scalar_;
};

template <typename T>
KernelArg cu_in(std::vector<T>& host) {
    return KernelArg(Direction::In, host);
}
template <typename T>
KernelArg cu_out(std::vector<T>& host) {
    return KernelArg(Direction::Out, host);
}
template <typename T>
KernelArg cu_inout(std::vector<T>& host) {
    return KernelArg(Direction::InOut, host);
}

// Per-call report: what one cuda_launch actually did.
struct LaunchReport {
    std::string kernel;
    std::string signature;
    bool cache_hit = false;
    std::uint64_t bytes_h2d = 0;
    std::uint64_t bytes_d2h = 0;
    std::optional<TrapInfo> trap;

    bool ok() const { return !trap.has_value(); }

    nlohmann::json to_json() const {
        nlohmann::json j{{"kernel", kernel},
                         {"signature", signature},
                         {"cache_hit", cache_hit},
                         {"bytes_h2d", bytes_h2d},
                         {"bytes_d2h", bytes_d2h}};
        if (trap.has_value()) {
            j["trap"] = {{"kind", std::string(TrapInfo::kind_name(trap->kind))},
                         {"block", {trap->block[0], trap->block[1], trap->block[2]}},
                         {"thread", {trap->thread[0], trap->thread[1], trap->thread[2]}},
                         {"instr", trap->instr_index},
                         {"code", trap->code}};
        } else {
            j["trap"] = nullptr;
        }
        return j;
    }
};

struct CacheStats {
    std::uint64_t entries = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t compiles = 0;
};

inline CacheStats cache_stats(DeviceContext& ctx) {
    const MethodCache& c = ctx.method_cache();
    return CacheStats{c.entries.size(), c.hits, c.misses, c.compiles};
}

// Specializes (once per signature), marshals, launches, synchronizes.
// Type errors surface before any device allocation; a trap still frees every
// buffer this call allocated and skips the downloads.
inline LaunchReport cuda_launch(DeviceContext& ctx, const KernelAst& kernel, const GridConfig& cfg,
                                const std::vector<KernelArg>& args) {
    if (args.size() != kernel.params.size())
        throw ArityError("kernel '" + kernel.name + "'", static_cast<int>(kernel.params.size()),
                         static_cast<int>(args.size()));

    std::vector<ArgType> arg_types;
    arg_types.reserve(args.size());
    for (const auto& a : args) arg_types.push_back(a.arg_type());
    Signature sig = signature_of(kernel.name, arg_types);
    std::string key = sig.to_string();

    LaunchReport report;
    report.kernel = kernel.name;
    report.signature = key;

    // Resolve through the method cache; compile/load/resolve happen at most
    // once per signature per context.
    MethodCache& cache = ctx.method_cache();
    FunctionHandle fn;
    auto hit = cache.entries.find(key);
    if (hit != cache.entries.end()) {
        ++cache.hits;
        report.cache_hit = true;
        fn = hit->second.function;
    } else {
        ++cache.misses;
        TypedKernel tk = specialize(kernel, arg_types);  // may abort: UnresolvedType / TypeMismatch
        vptx::Module module = lower(tk);
        ++cache.compiles;
        ModuleHandle mh = ctx.module_load(disassemble(module));
        fn = ctx.get_function(mh, kernel.name);
        cache.entries.emplace(key, MethodCache::Entry{mh, fn});
    }

    // Execute the launch plan: alloc, upload In/InOut, launch, download
    // Out/InOut, free. Scalars pass through untouched.
    struct Buffer {
        DevicePtr ptr;
        const KernelArg* arg;
    };
    std::vector<Buffer> buffers;
    std::vector<LaunchArg> raw_args;
    raw_args.reserve(args.size());

    for (const auto& a : args) {
        if (!a.is_array()) {
            switch (a.elem_type()) {
                case ScalarType::I32: raw_args.emplace_back(a.scalar().i32); break;
                case ScalarType::I64: raw_args.emplace_back(a.scalar().i64); break;
                case ScalarType::F32: raw_args.emplace_back(a.scalar().f32); break;
                case ScalarType::F64: raw_args.emplace_back(a.scalar().f64); break;
                default: throw ArgumentMismatch("pred scalar argument");
            }
            continue;
        }
        DevicePtr p = ctx.mem_alloc(a.bytes());
        if (a.direction() != Direction::Out) {
            ctx.memcpy_htod(p, a.data(), a.bytes());
            report.bytes_h2d += a.bytes();
        }
        buffers.push_back(Buffer{p, &a});
        raw_args.emplace_back(p);
    }

    LaunchResult result = ctx.launch(fn, cfg, raw_args);
    report.trap = result.trap;

    if (result.ok()) {
        for (const auto& b : buffers) {
            if (b.arg->direction() != Direction::In) {
                ctx.memcpy_dtoh(b.arg->data(), b.ptr, b.arg->bytes());
                report.bytes_d2h += b.arg->bytes();
            }
        }
    }
    for (const auto& b : buffers) ctx.mem_free(b.ptr);
    return report;
}

}  // namespace gridjit
