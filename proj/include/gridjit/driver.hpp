// SPDX-License-Identifier: Apache-2.0
//
// Driver-style device API: contexts, module loading from VPTX text, function
// handles, device memory, raw launches. The driver accepts only VPTX text,
// so codegen and the device stay decoupled at an observable boundary.
//
// Every operation is counted. The counters are the evidence surface for the
// zero-steady-state-overhead and transfer-minimality properties: there are no
// hidden transfers or loads anywhere in the stack.
//
// A DeviceContext is confined: callers serialize operations on one context;
// distinct contexts are fully independent.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gridjit/emulator.hpp"
#include "gridjit/errors.hpp"
#include "gridjit/types.hpp"
#include "gridjit/vptx.hpp"

#include <nlohmann/json.hpp>

namespace gridjit {

struct ModuleHandle {
    std::uint64_t ctx_id = 0;
    std::uint64_t id = 0;

    friend bool operator==(const ModuleHandle&, const ModuleHandle&) = default;
};

struct FunctionHandle {
    std::uint64_t ctx_id = 0;
    std::uint64_t id = 0;

    friend bool operator==(const FunctionHandle&, const FunctionHandle&) = default;
};

struct DevicePtr {
    std::uint64_t base = 0;
    std::uint64_t length = 0;  // bytes
    std::uint64_t ctx_id = 0;
};

// A raw launch argument: a scalar passed by value or a device buffer.
using LaunchArg = std::variant<std::int32_t, std::int64_t, float, double, DevicePtr>;

struct Counters {
    enum class Event : std::uint8_t { ModuleLoad, FunctionResolve, Alloc, Free, H2D, D2H, Launch };

    struct LaunchRecord {
        std::string kernel;
        std::array<std::uint32_t, 3> grid{1, 1, 1};
        std::array<std::uint32_t, 3> block{1, 1, 1};
        std::uint64_t h2d_bytes = 0;  // transferred since the previous launch
        std::uint64_t d2h_bytes = 0;  // transferred until the next launch (or snapshot)
    };

    std::uint64_t modules_loaded = 0;
    std::uint64_t functions_resolved = 0;
    std::uint64_t launches = 0;
    std::uint64_t allocs = 0;
    std::uint64_t frees = 0;
    std::uint64_t bytes_h2d = 0;
    std::uint64_t bytes_d2h = 0;
    std::vector<LaunchRecord> launch_log;

    // Flat operation stream, in order. Not exported; tests assert steady-state
    // launches perform only alloc/copy/launch/copy/free operations against it.
    std::vector<Event> events;

    nlohmann::json to_json() const {
        nlohmann::json log = nlohmann::json::array();
        for (const auto& r : launch_log) {
            log.push_back({{"kernel", r.kernel},
                           {"grid", {r.grid[0], r.grid[1], r.grid[2]}},
                           {"block", {r.block[0], r.block[1], r.block[2]}},
                           {"h2d_bytes", r.h2d_bytes},
                           {"d2h_bytes", r.d2h_bytes}});
        }
        return nlohmann::json{{"modules_loaded", modules_loaded},
                              {"functions_resolved", functions_resolved},
                              {"launches", launches},
                              {"allocs", allocs},
                              {"frees", frees},
                              {"bytes_h2d", bytes_h2d},
                              {"bytes_d2h", bytes_d2h},
                              {"launch_log", log}};
    }
};

// Method cache: signature -> loaded module + resolved function. Filled and
// read exclusively by the autolaunch layer; lives here so its lifetime and
// confinement are the context's.
struct MethodCache {
    struct Entry {
        ModuleHandle module;
        FunctionHandle function;
    };
    std::map<std::string, Entry> entries;  // keyed by rendered Signature
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t compiles = 0;
};

class DeviceContext {
  public:
    explicit DeviceContext(DeviceCaps caps = {}) : caps_(caps), id_(next_id()) {}

    DeviceContext(const DeviceContext&) = delete;
    DeviceContext& operator=(const DeviceContext&) = delete;
    DeviceContext(DeviceContext&&) = default;
    DeviceContext& operator=(DeviceContext&&) = default;

    std::uint64_t id() const { return id_; }
    const DeviceCaps& caps() const { return caps_; }

    // Releases everything and poisons the handle; every later operation
    // (including a second destroy) fails with ContextDestroyed.
    void destroy() {
        check_alive();
        destroyed_ = true;
        modules_.clear();
        functions_.clear();
        mem_ = GlobalMemory{};
    }

    bool destroyed() const { return destroyed_; }

    // ---- modules and functions ----------------------------------------------

    ModuleHandle module_load(std::string_view vptx_text) {
        check_alive();
        vptx::Module m = vptx::parse(vptx_text);  // VptxSyntaxError propagates, counter untouched
        auto diags = vptx::validate(m);
        if (!diags.empty()) {
            std::vector<std::string> msgs;
            msgs.reserve(diags.size());
            for (const auto& d : diags) msgs.push_back(d.to_string());
            throw ValidationFailed(std::move(msgs));
        }
        ModuleHandle h{id_, next_handle_++};
        modules_.emplace(h.id, std::move(m));
        ++counters_.modules_loaded;
        counters_.events.push_back(Counters::Event::ModuleLoad);
        return h;
    }

    void module_unload(ModuleHandle h) {
        check_alive();
        auto it = find_module(h);
        modules_.erase(it);
        // Handles resolved from this module die with it.
        for (auto fit = functions_.begin(); fit != functions_.end();) {
            if (fit->second.module_id == h.id) fit = functions_.erase(fit);
            else ++fit;
        }
    }

    FunctionHandle get_function(ModuleHandle h, std::string_view kernel_name) {
        check_alive();
        auto it = find_module(h);
        if (it->second.find_kernel(kernel_name) == nullptr) throw FunctionNotFound(std::string(kernel_name));
        FunctionHandle f{id_, next_handle_++};
        functions_.emplace(f.id, FunctionEntry{h.id, std::string(kernel_name)});
        ++counters_.functions_resolved;
        counters_.events.push_back(Counters::Event::FunctionResolve);
        return f;
    }

    // ---- memory ---------------------------------------------------------------

    DevicePtr mem_alloc(std::uint64_t bytes) {
        check_alive();
        DevicePtr p{mem_.alloc(bytes), bytes, id_};
        ++counters_.allocs;
        counters_.events.push_back(Counters::Event::Alloc);
        return p;
    }

    void mem_free(DevicePtr p) {
        check_alive();
        check_owned(p);
        if (!mem_.free(p.base)) throw DoubleFree();
        ++counters_.frees;
        counters_.events.push_back(Counters::Event::Free);
    }

    void memcpy_htod(DevicePtr dst, const void* src, std::uint64_t bytes) {
        check_alive();
        check_owned(dst);
        if (!mem_.is_live(dst.base)) throw UseAfterFree();
        if (bytes > mem_.size_of(dst.base))
            throw OutOfBounds("copy of " + std::to_string(bytes) + " bytes into an allocation of " +
                              std::to_string(mem_.size_of(dst.base)));
        if (bytes > 0) mem_.write(dst.base, src, bytes);
        counters_.bytes_h2d += bytes;
        counters_.events.push_back(Counters::Event::H2D);
    }

    void memcpy_dtoh(void* dst, DevicePtr src, std::uint64_t bytes) {
        check_alive();
        check_owned(src);
        if (!mem_.is_live(src.base)) throw UseAfterFree();
        if (bytes > mem_.size_of(src.base))
            throw OutOfBounds("copy of " + std::to_string(bytes) + " bytes out of an allocation of " +
                              std::to_string(mem_.size_of(src.base)));
        if (bytes > 0) mem_.read(src.base, dst, bytes);
        counters_.bytes_d2h += bytes;
        counters_.events.push_back(Counters::Event::D2H);
    }

    // ---- launch ---------------------------------------------------------------

    LaunchResult launch(FunctionHandle fn, const GridConfig& cfg, const std::vector<LaunchArg>& args) {
        check_alive();
        auto fit = functions_.find(fn.id);
        if (fn.ctx_id != id_ || fit == functions_.end())
            throw FunctionNotFound("stale or foreign function handle");
        auto mit = modules_.find(fit->second.module_id);
        if (mit == modules_.end()) throw FunctionNotFound("function's module was unloaded");

        std::vector<ArgValue> values;
        values.reserve(args.size());
        for (const auto& a : args) values.push_back(to_arg_value(a));

        LaunchResult result = run_kernel(mit->second, fit->second.kernel, cfg, values, mem_, caps_);

        ++counters_.launches;
        counters_.events.push_back(Counters::Event::Launch);
        finish_launch_log();
        Counters::LaunchRecord rec;
        rec.kernel = fit->second.kernel;
        rec.grid = cfg.grid;
        rec.block = cfg.block;
        rec.h2d_bytes = counters_.bytes_h2d - h2d_mark_;
        h2d_mark_ = counters_.bytes_h2d;
        d2h_mark_ = counters_.bytes_d2h;
        counters_.launch_log.push_back(std::move(rec));
        return result;
    }

    // ---- introspection ---------------------------------------------------------

    const Counters& counters() {
        check_alive();
        finish_launch_log();
        return counters_;
    }

    nlohmann::json counters_json() {
        check_alive();
        finish_launch_log();
        return counters_.to_json();
    }

    MethodCache& method_cache() {
        check_alive();
        return cache_;
    }

    GlobalMemory& memory() {
        check_alive();
        return mem_;
    }

  private:
    struct FunctionEntry {
        std::uint64_t module_id = 0;
        std::string kernel;
    };

    static std::uint64_t next_id() {
        static std::uint64_t counter = 0;
        return ++counter;
    }

    void check_alive() const {
        if (destroyed_) throw ContextDestroyed();
    }

    void check_owned(const DevicePtr& p) const {
        if (p.ctx_id != id_) throw ArgumentMismatch("device pointer belongs to another context");
        if (p.base == 0) throw ArgumentMismatch("null device pointer");
    }

    std::map<std::uint64_t, vptx::Module>::iterator find_module(ModuleHandle h) {
        auto it = modules_.find(h.id);
        if (h.ctx_id != id_ || it == modules_.end())
            throw ArgumentMismatch("stale or foreign module handle");
        return it;
    }

    ArgValue to_arg_value(const LaunchArg& a) const {
        if (const auto* v = std::get_if<std::int32_t>(&a)) return ArgValue::of_i32(*v);
        if (const auto* v = std::get_if<std::int64_t>(&a)) return ArgValue::of_i64(*v);
        if (const auto* v = std::get_if<float>(&a)) return ArgValue::of_f32(*v);
        if (const auto* v = std::get_if<double>(&a)) return ArgValue::of_f64(*v);
        const DevicePtr& p = std::get<DevicePtr>(a);
        check_owned(p);
        if (!mem_.is_live(p.base)) throw UseAfterFree();
        return ArgValue::of_ptr(p.base);
    }

    // Uploads before a launch and downloads after it belong to that launch's
    // record; the trailing record is finalized lazily (idempotently) at the
    // next launch or counter snapshot.
    void finish_launch_log() {
        if (!counters_.launch_log.empty())
            counters_.launch_log.back().d2h_bytes = counters_.bytes_d2h - d2h_mark_;
    }

    DeviceCaps caps_;
    std::uint64_t id_ = 0;
    bool destroyed_ = false;
    GlobalMemory mem_;
    std::map<std::uint64_t, vptx::Module> modules_;
    std::map<std::uint64_t, FunctionEntry> functions_;
    std::uint64_t next_handle_ = 1;
    Counters counters_;
    MethodCache cache_;
    std::uint64_t h2d_mark_ = 0;
    std::uint64_t d2h_mark_ = 0;
};

inline DeviceContext create_context(DeviceCaps caps = {}) { return DeviceContext(caps); }

}  // namespace gridjit
