// SPDX-License-Identifier: Apache-2.0
//
// Type specialization: inference, widening rules, literal adoption, the
// boxing abort, and soundness against the independent typing checker.

#include <catch2/catch_amalgamated.hpp>

#include "gridjit/parser.hpp"
#include "gridjit/specialize.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace gridjit;

namespace {

KernelAst vadd_ast() {
    return parse_kernel(
        "kernel vadd(a, b, c) {\n"
        "  i = block_id_x() + (thread_id_x() - 1) * num_blocks_x();\n"
        "  c[i] = a[i] + b[i];\n"
        "}\n");
}

std::vector<ArgType> arrays3(ScalarType t) {
    return {ArgType::array(t), ArgType::array(t), ArgType::array(t)};
}

const Expr& store_value(const TypedKernel& tk, std::size_t stmt) { return tk.ast.body[stmt].exprs[1]; }

}  // namespace

TEST_CASE("vadd specializes for f32 arrays") {
    TypedKernel tk = specialize(vadd_ast(), arrays3(ScalarType::F32));
    CHECK(tk.local_types.at("i") == ScalarType::I32);
    CHECK(tk.type_of(store_value(tk, 1)) == ScalarType::F32);
    CHECK(tk.signature.to_string() == "vadd(f32[],f32[],f32[])");
    oracle::TypingChecker::check(tk);
}

TEST_CASE("the same kernel specializes separately for f64 arrays") {
    TypedKernel f32 = specialize(vadd_ast(), arrays3(ScalarType::F32));
    TypedKernel f64 = specialize(vadd_ast(), arrays3(ScalarType::F64));
    CHECK(f64.type_of(store_value(f64, 1)) == ScalarType::F64);
    CHECK(f32.signature != f64.signature);
    oracle::TypingChecker::check(f64);
}

TEST_CASE("branch-conflicting local aborts with UnresolvedType") {
    KernelAst k = parse_kernel(
        "kernel k(a, out) {\n"
        "  if (a[1] > 0.0) { x = 1; } else { x = 1.0; }\n"
        "  out[1] = x;\n"
        "}\n");
    try {
        specialize(k, {ArgType::array(ScalarType::F64), ArgType::array(ScalarType::F64)});
        FAIL("expected UnresolvedType");
    } catch (const UnresolvedType& e) {
        CHECK(e.local == "x");
        REQUIRE(e.conflicting.size() == 2);
        CHECK(e.conflicting[0] == "i32");
        CHECK(e.conflicting[1] == "f64");
    }
}

TEST_CASE("property: branch-conflicting kernels always abort") {
    gen::Rng rng(0xC0117);
    for (int i = 0; i < 200; ++i) {
        KernelAst k = gen::conflict_kernel(rng);
        INFO("case " << i);
        CHECK_THROWS_AS(specialize(k, {ArgType::array(ScalarType::F32), ArgType::array(ScalarType::F64)}),
                        UnresolvedType);
    }
}

TEST_CASE("widening within a family, never across") {
    SECTION("i32 local widens to i64 across assignments") {
        KernelAst k = parse_kernel(
            "kernel k(a, out) {\n"
            "  x = 1;\n"
            "  x = i64(2);\n"
            "  out[1] = x;\n"
            "}\n");
        TypedKernel tk = specialize(k, {ArgType::array(ScalarType::I64), ArgType::array(ScalarType::I64)});
        CHECK(tk.local_types.at("x") == ScalarType::I64);
        oracle::TypingChecker::check(tk);
    }
    SECTION("mixed int/float arithmetic is a TypeMismatch") {
        KernelAst k = parse_kernel("kernel k(a, out){ out[1] = a[1] + 1; }");
        CHECK_THROWS_AS(specialize(k, {ArgType::array(ScalarType::F32), ArgType::array(ScalarType::F32)}),
                        TypeMismatch);
    }
    SECTION("mixed-width int arithmetic joins to i64") {
        KernelAst k = parse_kernel("kernel k(a, out){ x = a[1] + i64(1); out[1] = x; }");
        TypedKernel tk = specialize(k, {ArgType::array(ScalarType::I32), ArgType::array(ScalarType::I64)});
        CHECK(tk.local_types.at("x") == ScalarType::I64);
        oracle::TypingChecker::check(tk);
    }
}

TEST_CASE("literal adoption is widening-only") {
    SECTION("int literal adopts a wider binary partner") {
        KernelAst k = parse_kernel("kernel k(a, out){ out[1] = a[1] + 1; }");
        TypedKernel tk = specialize(k, {ArgType::array(ScalarType::I64), ArgType::array(ScalarType::I64)});
        const Expr& lit = store_value(tk, 0).operands[1];
        REQUIRE(lit.kind == Expr::Kind::IntLit);
        CHECK(tk.type_of(lit) == ScalarType::I64);
        oracle::TypingChecker::check(tk);
    }
    SECTION("bare int literal stored into an i64 array adopts it") {
        KernelAst k = parse_kernel("kernel k(out){ out[1] = 7; }");
        TypedKernel tk = specialize(k, {ArgType::array(ScalarType::I64)});
        CHECK(tk.type_of(store_value(tk, 0)) == ScalarType::I64);
        oracle::TypingChecker::check(tk);
    }
    SECTION("float literals never narrow to f32 implicitly") {
        KernelAst k = parse_kernel("kernel k(a, out){ out[1] = a[1] + 1.5; }");
        CHECK_THROWS_AS(specialize(k, {ArgType::array(ScalarType::F32), ArgType::array(ScalarType::F32)}),
                        TypeMismatch);
    }
    SECTION("an explicit cast fixes the f32 case") {
        KernelAst k = parse_kernel("kernel k(a, out){ out[1] = a[1] + f32(1.5); }");
        TypedKernel tk = specialize(k, {ArgType::array(ScalarType::F32), ArgType::array(ScalarType::F32)});
        CHECK(tk.type_of(store_value(tk, 0)) == ScalarType::F32);
        oracle::TypingChecker::check(tk);
    }
    SECTION("narrower non-literal store values need an explicit cast") {
        KernelAst k = parse_kernel("kernel k(a, out){ x = a[1]; out[1] = x; }");
        CHECK_THROWS_AS(specialize(k, {ArgType::array(ScalarType::I32), ArgType::array(ScalarType::I64)}),
                        TypeMismatch);
    }
    SECTION("big integer literals default to i64") {
        KernelAst k = parse_kernel("kernel k(out){ out[1] = 4294967296; }");
        TypedKernel tk = specialize(k, {ArgType::array(ScalarType::I64)});
        CHECK(tk.type_of(store_value(tk, 0)) == ScalarType::I64);
    }
}

TEST_CASE("ill-typed operations") {
    auto specialize1 = [](const char* src, std::vector<ArgType> args) {
        return specialize(parse_kernel(src), args);
    };
    SECTION("rem on floats") {
        CHECK_THROWS_AS(specialize1("kernel k(a, out){ out[1] = a[1] % a[2]; }",
                                    {ArgType::array(ScalarType::F32), ArgType::array(ScalarType::F32)}),
                        TypeMismatch);
    }
    SECTION("indexing a scalar") {
        CHECK_THROWS_AS(specialize1("kernel k(n, out){ out[1] = n[1]; }",
                                    {ArgType::scalar(ScalarType::I32), ArgType::array(ScalarType::I32)}),
                        TypeMismatch);
    }
    SECTION("array parameter used as a scalar") {
        CHECK_THROWS_AS(specialize1("kernel k(a, out){ out[1] = a; }",
                                    {ArgType::array(ScalarType::I32), ArgType::array(ScalarType::I32)}),
                        TypeMismatch);
    }
    SECTION("float index") {
        CHECK_THROWS_AS(specialize1("kernel k(a, out){ out[1.5] = a[1]; }",
                                    {ArgType::array(ScalarType::F32), ArgType::array(ScalarType::F32)}),
                        IndexTypeError);
    }
    SECTION("condition must be a predicate") {
        CHECK_THROWS_AS(specialize1("kernel k(a, out){ if (a[1]) { out[1] = a[1]; } }",
                                    {ArgType::array(ScalarType::I32), ArgType::array(ScalarType::I32)}),
                        TypeMismatch);
    }
    SECTION("float-only intrinsics reject ints") {
        CHECK_THROWS_AS(specialize1("kernel k(a, out){ out[1] = sqrt(a[1]); }",
                                    {ArgType::array(ScalarType::I32), ArgType::array(ScalarType::I32)}),
                        TypeMismatch);
    }
    SECTION("pred parameters cannot cross the boundary") {
        KernelAst k = parse_kernel("kernel k(p){ x = 1; }");
        CHECK_THROWS_AS(specialize(k, {ArgType::scalar(ScalarType::Pred)}), TypeMismatch);
    }
    SECTION("arity") {
        KernelAst k = parse_kernel("kernel k(a, b){ x = 1; }");
        CHECK_THROWS_AS(specialize(k, {ArgType::array(ScalarType::I32)}), ArityError);
    }
}

TEST_CASE("scalar parameters participate in inference") {
    KernelAst k = parse_kernel("kernel k(n, out){ out[thread_id_x()] = n * 2; }");
    TypedKernel tk = specialize(k, {ArgType::scalar(ScalarType::I32), ArgType::array(ScalarType::I32)});
    CHECK(tk.type_of(store_value(tk, 0)) == ScalarType::I32);
    oracle::TypingChecker::check(tk);
}

TEST_CASE("pred-typed locals flow through control flow") {
    KernelAst k = parse_kernel(
        "kernel k(a, out) {\n"
        "  flag = a[1] > 0.0 && a[2] < 10.0;\n"
        "  if (!flag || a[1] == 0.0) { out[1] = a[1]; }\n"
        "}\n");
    TypedKernel tk = specialize(k, {ArgType::array(ScalarType::F64), ArgType::array(ScalarType::F64)});
    CHECK(tk.local_types.at("flag") == ScalarType::Pred);
    oracle::TypingChecker::check(tk);
}

TEST_CASE("signature_of is deterministic and injective on inputs") {
    auto s1 = signature_of("vadd", arrays3(ScalarType::F32));
    auto s2 = signature_of("vadd", arrays3(ScalarType::F32));
    CHECK(s1 == s2);
    CHECK(s1.hash_hex() == s2.hash_hex());
    CHECK(s1 != signature_of("vadd", arrays3(ScalarType::F64)));
    CHECK(s1 != signature_of("vsub", arrays3(ScalarType::F32)));
    auto mixed = signature_of("vadd", {ArgType::scalar(ScalarType::I32), ArgType::array(ScalarType::F32)});
    CHECK(mixed.to_string() == "vadd(i32,f32[])");
    CHECK(mixed != s1);
}

TEST_CASE("specialization is deterministic") {
    KernelAst k = vadd_ast();
    TypedKernel a = specialize(k, arrays3(ScalarType::F32));
    TypedKernel b = specialize(k, arrays3(ScalarType::F32));
    CHECK(a.ast == b.ast);
    CHECK(a.signature == b.signature);
    CHECK(a.local_types == b.local_types);
    CHECK(a.expr_types == b.expr_types);
}

TEST_CASE("property: every specialization passes the independent typing checker") {
    gen::StraightLineGen g(0x51DE);
    for (int i = 0; i < 300; ++i) {
        gen::StraightLineCase c = g.generate(i, 8);
        std::vector<ArgType> args = {ArgType::array(c.elem), ArgType::array(c.elem), ArgType::array(c.elem)};
        INFO("case " << i);
        TypedKernel tk = specialize(c.kernel, args);
        REQUIRE_NOTHROW(oracle::TypingChecker::check(tk));
    }
}
