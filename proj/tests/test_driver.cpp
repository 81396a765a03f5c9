// SPDX-License-Identifier: Apache-2.0
//
// Driver API: context lifecycle, module/function handles, memory transfer
// accounting, launches, and the full manual host-flow replay.

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

#include "gridjit/codegen.hpp"
#include "gridjit/driver.hpp"
#include "gridjit/parser.hpp"
#include "gridjit/specialize.hpp"

using namespace gridjit;

namespace {

std::string vadd_text() {
    KernelAst k = parse_kernel(
        "kernel vadd(a, b, c) {\n"
        "  i = block_id_x() + (thread_id_x() - 1) * num_blocks_x();\n"
        "  c[i] = a[i] + b[i];\n"
        "}\n");
    TypedKernel tk = specialize(k, {ArgType::array(ScalarType::F32), ArgType::array(ScalarType::F32),
                                    ArgType::array(ScalarType::F32)});
    return disassemble(lower(tk));
}

}  // namespace

TEST_CASE("fresh context has zeroed counters") {
    DeviceContext ctx = create_context();
    const Counters& c = ctx.counters();
    CHECK(c.modules_loaded == 0);
    CHECK(c.functions_resolved == 0);
    CHECK(c.launches == 0);
    CHECK(c.allocs == 0);
    CHECK(c.frees == 0);
    CHECK(c.bytes_h2d == 0);
    CHECK(c.bytes_d2h == 0);
    CHECK(c.launch_log.empty());
}

TEST_CASE("context destruction poisons the handle") {
    DeviceContext ctx = create_context();
    DevicePtr p = ctx.mem_alloc(16);
    ctx.destroy();
    CHECK_THROWS_AS(ctx.destroy(), ContextDestroyed);
    CHECK_THROWS_AS(ctx.mem_free(p), ContextDestroyed);
    CHECK_THROWS_AS(ctx.mem_alloc(4), ContextDestroyed);
    CHECK_THROWS_AS(ctx.module_load(".module m\n"), ContextDestroyed);
}

TEST_CASE("module loading") {
    DeviceContext ctx = create_context();
    std::string text = vadd_text();

    SECTION("two loads give independent handles") {
        ModuleHandle h1 = ctx.module_load(text);
        ModuleHandle h2 = ctx.module_load(text);
        CHECK(h1 != h2);
        CHECK(ctx.counters().modules_loaded == 2);
    }
    SECTION("malformed text leaves the counter untouched") {
        CHECK_THROWS_AS(ctx.module_load("not a module"), VptxSyntaxError);
        CHECK(ctx.counters().modules_loaded == 0);
    }
    SECTION("unvalidatable module reports diagnostics") {
        std::string bad = ".module m\n.kernel k() {\n  bra L_missing\n  ret\n}\n";
        try {
            ctx.module_load(bad);
            FAIL("expected ValidationFailed");
        } catch (const ValidationFailed& e) {
            REQUIRE(!e.diagnostics.empty());
            CHECK(e.diagnostics[0].find("undefined label") != std::string::npos);
        }
        CHECK(ctx.counters().modules_loaded == 0);
    }
}

TEST_CASE("function resolution") {
    DeviceContext ctx = create_context();
    ModuleHandle md = ctx.module_load(vadd_text());
    FunctionHandle f1 = ctx.get_function(md, "vadd");
    FunctionHandle f2 = ctx.get_function(md, "vadd");
    CHECK(f1 != f2);
    CHECK(ctx.counters().functions_resolved == 2);
    CHECK_THROWS_AS(ctx.get_function(md, "nosuch"), FunctionNotFound);

    SECTION("both handles launch identically") {
        GridConfig cfg;
        cfg.grid = {4, 1, 1};
        DevicePtr ga = ctx.mem_alloc(16), gb = ctx.mem_alloc(16), gc1 = ctx.mem_alloc(16),
                  gc2 = ctx.mem_alloc(16);
        std::vector<float> a = {1, 2, 3, 4}, b = {5, 6, 7, 8};
        ctx.memcpy_htod(ga, a.data(), 16);
        ctx.memcpy_htod(gb, b.data(), 16);
        REQUIRE(ctx.launch(f1, cfg, {ga, gb, gc1}).ok());
        REQUIRE(ctx.launch(f2, cfg, {ga, gb, gc2}).ok());
        std::vector<float> c1(4), c2(4);
        ctx.memcpy_dtoh(c1.data(), gc1, 16);
        ctx.memcpy_dtoh(c2.data(), gc2, 16);
        CHECK(c1 == c2);
        CHECK(c1 == std::vector<float>{6, 8, 10, 12});
    }
    SECTION("unload invalidates function handles") {
        ctx.module_unload(md);
        GridConfig cfg;
        CHECK_THROWS_AS(ctx.launch(f1, cfg, {}), FunctionNotFound);
    }
}

TEST_CASE("memory transfer accounting is exact") {
    DeviceContext ctx = create_context();
    DevicePtr p = ctx.mem_alloc(48);
    CHECK(ctx.counters().allocs == 1);

    std::vector<float> host(12, 1.5f);
    ctx.memcpy_htod(p, host.data(), 48);
    CHECK(ctx.counters().bytes_h2d == 48);

    std::vector<float> back(12, 0.0f);
    ctx.memcpy_dtoh(back.data(), p, 48);
    CHECK(ctx.counters().bytes_d2h == 48);
    CHECK(back == host);

    SECTION("over-length copies fail without counting") {
        std::vector<float> big(13, 0.0f);
        CHECK_THROWS_AS(ctx.memcpy_htod(p, big.data(), 49), OutOfBounds);
        CHECK(ctx.counters().bytes_h2d == 48);
        CHECK_THROWS_AS(ctx.memcpy_dtoh(big.data(), p, 52), OutOfBounds);
        CHECK(ctx.counters().bytes_d2h == 48);
    }
    SECTION("free hygiene") {
        ctx.mem_free(p);
        CHECK(ctx.counters().frees == 1);
        CHECK_THROWS_AS(ctx.mem_free(p), DoubleFree);
        CHECK_THROWS_AS(ctx.memcpy_htod(p, host.data(), 4), UseAfterFree);
        CHECK_THROWS_AS(ctx.memcpy_dtoh(back.data(), p, 4), UseAfterFree);
    }
    SECTION("zero-byte allocations are distinct and non-null") {
        DevicePtr z1 = ctx.mem_alloc(0);
        DevicePtr z2 = ctx.mem_alloc(0);
        CHECK(z1.base != 0);
        CHECK(z2.base != 0);
        CHECK(z1.base != z2.base);
        CHECK(z1.length == 0);
    }
    SECTION("pointers from another context are rejected") {
        DeviceContext other = create_context();
        DevicePtr foreign = other.mem_alloc(16);
        CHECK_THROWS_AS(ctx.memcpy_htod(foreign, host.data(), 4), ArgumentMismatch);
    }
}

TEST_CASE("multi-kernel modules resolve each kernel independently") {
    DeviceContext ctx = create_context();
    std::string text =
        ".module pair\n"
        ".kernel first(.param ptr.global.i32 out) {\n"
        "  .reg i64 %r0\n  .reg i32 %r1\n"
        "  mov.i64 %r0, out\n  mov.i32 %r1, 11\n"
        "  st.global.i32 [%r0], %r1\n  ret\n}\n"
        ".kernel second(.param ptr.global.i32 out) {\n"
        "  .reg i64 %r0\n  .reg i32 %r1\n"
        "  mov.i64 %r0, out\n  mov.i32 %r1, 22\n"
        "  st.global.i32 [%r0], %r1\n  ret\n}\n";
    ModuleHandle md = ctx.module_load(text);
    FunctionHandle f1 = ctx.get_function(md, "first");
    FunctionHandle f2 = ctx.get_function(md, "second");
    DevicePtr p = ctx.mem_alloc(4);
    GridConfig cfg;
    REQUIRE(ctx.launch(f1, cfg, {p}).ok());
    std::int32_t v = 0;
    ctx.memcpy_dtoh(&v, p, 4);
    CHECK(v == 11);
    REQUIRE(ctx.launch(f2, cfg, {p}).ok());
    ctx.memcpy_dtoh(&v, p, 4);
    CHECK(v == 22);
}

TEST_CASE("stale and foreign handles are rejected") {
    DeviceContext ctx = create_context();
    ModuleHandle md = ctx.module_load(vadd_text());
    SECTION("get_function on an unloaded module") {
        ctx.module_unload(md);
        CHECK_THROWS_AS(ctx.get_function(md, "vadd"), ArgumentMismatch);
    }
    SECTION("module handle from another context") {
        DeviceContext other = create_context();
        CHECK_THROWS_AS(other.get_function(md, "vadd"), ArgumentMismatch);
    }
    SECTION("freed device pointer as a launch argument") {
        FunctionHandle fn = ctx.get_function(md, "vadd");
        DevicePtr p = ctx.mem_alloc(4);
        ctx.mem_free(p);
        GridConfig cfg;
        CHECK_THROWS_AS(ctx.launch(fn, cfg, {p, p, p}), UseAfterFree);
    }
}

TEST_CASE("launch argument checking") {
    DeviceContext ctx = create_context();
    ModuleHandle md = ctx.module_load(vadd_text());
    FunctionHandle fn = ctx.get_function(md, "vadd");
    GridConfig cfg;
    DevicePtr p = ctx.mem_alloc(4);

    CHECK_THROWS_AS(ctx.launch(fn, cfg, {p, p}), ArgumentMismatch);            // wrong arity
    CHECK_THROWS_AS(ctx.launch(fn, cfg, {p, p, 1.5f}), ArgumentMismatch);     // scalar for pointer param
    CHECK(ctx.counters().launches == 0);

    SECTION("a trapping launch still counts and logs") {
        // Index 2 in a one-element array.
        GridConfig big = cfg;
        big.grid = {2, 1, 1};
        LaunchResult r = ctx.launch(fn, big, {p, p, p});
        REQUIRE(!r.ok());
        CHECK(r.trap->kind == TrapInfo::Kind::GlobalOutOfBounds);
        CHECK(ctx.counters().launches == 1);
        REQUIRE(ctx.counters().launch_log.size() == 1);
        CHECK(ctx.counters().launch_log[0].kernel == "vadd");
    }
}

TEST_CASE("the manual host flow: load, resolve, alloc, copy, launch, copy, free") {
    // Mirrors the verbose driver-level flow end to end, with dims (3, 4)
    // flattened row-major to 12 elements.
    DeviceContext ctx = create_context();

    ModuleHandle md = ctx.module_load(vadd_text());
    FunctionHandle vadd_fun = ctx.get_function(md, "vadd");

    std::vector<float> a(12), b(12);
    for (int i = 0; i < 12; ++i) {
        a[static_cast<std::size_t>(i)] = static_cast<float>((i * 37) % 100);
        b[static_cast<std::size_t>(i)] = static_cast<float>((i * 91) % 100);
    }

    DevicePtr ga = ctx.mem_alloc(12 * sizeof(float));
    DevicePtr gb = ctx.mem_alloc(12 * sizeof(float));
    DevicePtr gc = ctx.mem_alloc(12 * sizeof(float));
    ctx.memcpy_htod(ga, a.data(), 12 * sizeof(float));
    ctx.memcpy_htod(gb, b.data(), 12 * sizeof(float));

    GridConfig cfg;
    cfg.grid = {12, 1, 1};
    cfg.block = {1, 1, 1};
    LaunchResult r = ctx.launch(vadd_fun, cfg, {ga, gb, gc});
    REQUIRE(r.ok());

    std::vector<float> c(12, 0.0f);
    ctx.memcpy_dtoh(c.data(), gc, 12 * sizeof(float));

    for (int i = 0; i < 12; ++i)
        CHECK(c[static_cast<std::size_t>(i)] == a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)]);

    ctx.mem_free(ga);
    ctx.mem_free(gb);
    ctx.mem_free(gc);
    ctx.module_unload(md);

    const Counters& counters = ctx.counters();
    CHECK(counters.modules_loaded == 1);
    CHECK(counters.functions_resolved == 1);
    CHECK(counters.launches == 1);
    CHECK(counters.allocs == 3);
    CHECK(counters.frees == 3);
    CHECK(counters.bytes_h2d == 96);
    CHECK(counters.bytes_d2h == 48);
    REQUIRE(counters.launch_log.size() == 1);
    CHECK(counters.launch_log[0].h2d_bytes == 96);
    CHECK(counters.launch_log[0].d2h_bytes == 48);
    CHECK(counters.launch_log[0].grid == std::array<std::uint32_t, 3>{12, 1, 1});

    ctx.destroy();
}

TEST_CASE("counter snapshot exports stable JSON field names") {
    DeviceContext ctx = create_context();
    ModuleHandle md = ctx.module_load(vadd_text());
    FunctionHandle fn = ctx.get_function(md, "vadd");
    DevicePtr p = ctx.mem_alloc(4 * sizeof(float));
    std::vector<float> h(4, 1.0f);
    ctx.memcpy_htod(p, h.data(), 16);
    GridConfig cfg;
    cfg.grid = {4, 1, 1};
    ctx.launch(fn, cfg, {p, p, p});
    ctx.memcpy_dtoh(h.data(), p, 16);

    nlohmann::json j = ctx.counters_json();
    for (const char* key : {"modules_loaded", "functions_resolved", "launches", "allocs", "frees",
                            "bytes_h2d", "bytes_d2h", "launch_log"})
        CHECK(j.contains(key));
    CHECK(j["modules_loaded"] == 1);
    CHECK(j["launches"] == 1);
    REQUIRE(j["launch_log"].is_array());
    REQUIRE(j["launch_log"].size() == 1);
    CHECK(j["launch_log"][0]["kernel"] == "vadd");
    CHECK(j["launch_log"][0]["h2d_bytes"] == 16);
    CHECK(j["launch_log"][0]["d2h_bytes"] == 16);
    CHECK(j["launch_log"][0]["grid"][0] == 4);
}

TEST_CASE("distinct contexts are fully independent") {
    DeviceContext c1 = create_context();
    DeviceContext c2 = create_context();
    c1.mem_alloc(64);
    CHECK(c1.counters().allocs == 1);
    CHECK(c2.counters().allocs == 0);
    c2.module_load(vadd_text());
    CHECK(c1.counters().modules_loaded == 0);
}
