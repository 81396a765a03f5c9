// SPDX-License-Identifier: Apache-2.0
//
// gridjit CLI: compile kernels to VPTX text, run them on the emulated
// device through the autolaunch facade, and canonicalize VPTX files.
//
// Exit codes (stable): 0 success, 1 compile error, 2 usage error,
// 3 runtime trap.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridjit/gridjit.hpp"

namespace {

using namespace gridjit;

constexpr int kExitOk = 0;
constexpr int kExitCompileError = 1;
constexpr int kExitUsageError = 2;
constexpr int kExitTrap = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw UsageError("cannot write '" + path + "'");
    out << data;
}

KernelAst select_kernel(const std::vector<KernelAst>& kernels, const std::string& name) {
    if (name.empty()) {
        if (kernels.size() == 1) return kernels[0];
        throw UsageError("file defines " + std::to_string(kernels.size()) +
                         " kernels; select one with --kernel");
    }
    for (const auto& k : kernels)
        if (k.name == name) return k;
    throw UsageError("no kernel named '" + name + "' in the file");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t p = s.find(sep, start);
        if (p == std::string::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, p - start));
        start = p + 1;
    }
}

std::vector<ArgType> parse_type_list(const std::string& text) {
    std::vector<ArgType> types;
    for (const std::string& part : split(text, ',')) {
        ArgType t;
        if (!parse_arg_type(part, t)) throw UsageError("bad type '" + part + "' in --types");
        types.push_back(t);
    }
    return types;
}

std::array<std::uint32_t, 3> parse_dims(const std::string& text, const char* what) {
    auto parts = split(text, ',');
    if (parts.empty() || parts.size() > 3) throw UsageError(std::string("bad ") + what + " '" + text + "'");
    std::array<std::uint32_t, 3> dims{1, 1, 1};
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::uint32_t v = 0;
        auto [p, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), v);
        if (ec != std::errc() || p != parts[i].data() + parts[i].size() || v == 0)
            throw UsageError(std::string("bad ") + what + " '" + text + "'");
        dims[i] = v;
    }
    return dims;
}

// One parsed --arg SPEC with its backing host storage.
struct CliArg {
    Direction dir = Direction::InOut;
    bool is_array = false;
    ScalarType type = ScalarType::F32;
    std::vector<std::int32_t> i32s;
    std::vector<std::int64_t> i64s;
    std::vector<float> f32s;
    std::vector<double> f64s;

    std::size_t count() const {
        switch (type) {
            case ScalarType::I32: return i32s.size();
            case ScalarType::I64: return i64s.size();
            case ScalarType::F32: return f32s.size();
            case ScalarType::F64: return f64s.size();
            default: return 0;
        }
    }
};

template <typename T>
T parse_scalar_text(const std::string& text) {
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
        throw UsageError("bad value '" + text + "' in --arg");
    return v;
}

template <typename T>
std::vector<T> parse_csv_values(const std::string& text) {
    std::vector<T> values;
    for (const std::string& part : split(text, ',')) values.push_back(parse_scalar_text<T>(part));
    return values;
}

template <typename T>
std::vector<T> read_binary_values(const std::string& path) {
    std::string bytes = read_file(path);
    if (bytes.size() % sizeof(T) != 0)
        throw UsageError("'" + path + "' is not a whole number of elements");
    std::vector<T> values(bytes.size() / sizeof(T));
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return values;
}

// SPEC := <dir>:<type>:<payload>; payload is CSV values, @<path> for raw
// little-endian binary, or zeros:<count> for fresh output arrays.
CliArg parse_arg_spec(const std::string& spec) {
    auto head = spec.find(':');
    if (head == std::string::npos) throw UsageError("bad --arg '" + spec + "' (want dir:type:payload)");
    auto mid = spec.find(':', head + 1);
    if (mid == std::string::npos) throw UsageError("bad --arg '" + spec + "' (want dir:type:payload)");

    CliArg arg;
    std::string dir = spec.substr(0, head);
    if (dir == "in") arg.dir = Direction::In;
    else if (dir == "out") arg.dir = Direction::Out;
    else if (dir == "inout") arg.dir = Direction::InOut;
    else throw UsageError("bad direction '" + dir + "' in --arg");

    std::string type_text = spec.substr(head + 1, mid - head - 1);
    ArgType at;
    if (!parse_arg_type(type_text, at)) throw UsageError("bad type '" + type_text + "' in --arg");
    arg.is_array = at.is_array();
    arg.type = at.elem;

    std::string payload = spec.substr(mid + 1);
    auto fill = [&](auto& vec) {
        using T = typename std::decay_t<decltype(vec)>::value_type;
        if (!arg.is_array) {
            vec.push_back(parse_scalar_text<T>(payload));
        } else if (payload.starts_with("zeros:")) {
            std::size_t n = parse_scalar_text<std::uint64_t>(payload.substr(6));
            vec.assign(n, T{});
        } else if (payload.starts_with("@")) {
            vec = read_binary_values<T>(payload.substr(1));
        } else {
            vec = parse_csv_values<T>(payload);
        }
    };
    switch (arg.type) {
        case ScalarType::I32: fill(arg.i32s); break;
        case ScalarType::I64: fill(arg.i64s); break;
        case ScalarType::F32: fill(arg.f32s); break;
        case ScalarType::F64: fill(arg.f64s); break;
        default: throw UsageError("bad type in --arg");
    }
    if (arg.is_array && arg.count() == 0)
        throw UsageError("array --arg '" + spec + "' needs at least one element (or zeros:<count>)");
    return arg;
}

KernelArg to_kernel_arg(CliArg& a) {
    if (a.is_array) {
        switch (a.type) {
            case ScalarType::I32: return KernelArg(a.dir, a.i32s);
            case ScalarType::I64: return KernelArg(a.dir, a.i64s);
            case ScalarType::F32: return KernelArg(a.dir, a.f32s);
            default: return KernelArg(a.dir, a.f64s);
        }
    }
    switch (a.type) {
        case ScalarType::I32: return KernelArg(a.i32s[0]);
        case ScalarType::I64: return KernelArg(a.i64s[0]);
        case ScalarType::F32: return KernelArg(a.f32s[0]);
        default: return KernelArg(a.f64s[0]);
    }
}

template <typename T>
std::string format_value(T v) {
    if constexpr (std::is_floating_point_v<T>) {
        char buf[64];
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, end);
    } else {
        return std::to_string(v);
    }
}

void print_array_csv(const CliArg& a, std::ostream& out) {
    auto line = [&](const auto& vec) {
        for (std::size_t i = 0; i < vec.size(); ++i) {
            if (i) out << ",";
            out << format_value(vec[i]);
        }
        out << "\n";
    };
    switch (a.type) {
        case ScalarType::I32: line(a.i32s); break;
        case ScalarType::I64: line(a.i64s); break;
        case ScalarType::F32: line(a.f32s); break;
        case ScalarType::F64: line(a.f64s); break;
        default: break;
    }
}

void print_array_bin(const CliArg& a, std::ostream& out) {
    auto dump = [&](const auto& vec) {
        using T = typename std::decay_t<decltype(vec)>::value_type;
        out.write(reinterpret_cast<const char*>(vec.data()),
                  static_cast<std::streamsize>(vec.size() * sizeof(T)));
    };
    switch (a.type) {
        case ScalarType::I32: dump(a.i32s); break;
        case ScalarType::I64: dump(a.i64s); break;
        case ScalarType::F32: dump(a.f32s); break;
        case ScalarType::F64: dump(a.f64s); break;
        default: break;
    }
}

// ---- subcommands ---------------------------------------------------------------

int cmd_compile(const std::string& file, const std::string& kernel_name, const std::string& types_text,
                const std::string& output) {
    auto kernels = parse_kernel_file(read_file(file));
    KernelAst kernel = select_kernel(kernels, kernel_name);
    std::vector<ArgType> types = parse_type_list(types_text);
    if (types.size() != kernel.params.size())
        throw UsageError("--types lists " + std::to_string(types.size()) + " type(s), kernel '" + kernel.name +
                         "' has " + std::to_string(kernel.params.size()) + " parameter(s)");
    std::string text = disassemble(lower(specialize(kernel, types)));
    if (output.empty()) std::cout << text;
    else write_file(output, text);
    return kExitOk;
}

int cmd_disasm(const std::string& file) {
    vptx::Module m = vptx::parse(read_file(file));
    std::cout << vptx::print(m);
    return kExitOk;
}

int cmd_run(const std::string& file, const std::string& kernel_name, const std::string& grid_text,
            const std::string& block_text, const std::vector<std::string>& arg_specs,
            const std::string& report_path, const std::string& out_format, int repeat) {
    if (repeat < 1) throw UsageError("--repeat must be >= 1");
    if (out_format != "csv" && out_format != "bin") throw UsageError("--out-format must be csv or bin");

    auto kernels = parse_kernel_file(read_file(file));
    KernelAst kernel = select_kernel(kernels, kernel_name);
    if (arg_specs.size() != kernel.params.size())
        throw UsageError("kernel '" + kernel.name + "' has " + std::to_string(kernel.params.size()) +
                         " parameter(s), got " + std::to_string(arg_specs.size()) + " --arg");

    GridConfig cfg;
    cfg.grid = parse_dims(grid_text, "--grid");
    cfg.block = parse_dims(block_text, "--block");

    std::vector<CliArg> cli_args;
    cli_args.reserve(arg_specs.size());
    for (const auto& spec : arg_specs) cli_args.push_back(parse_arg_spec(spec));

    DeviceContext ctx = create_context();
    std::vector<LaunchReport> reports;
    for (int i = 0; i < repeat; ++i) {
        std::vector<KernelArg> args;
        args.reserve(cli_args.size());
        for (auto& a : cli_args) args.push_back(to_kernel_arg(a));
        reports.push_back(cuda_launch(ctx, kernel, cfg, args));
        if (!reports.back().ok()) break;
    }
    const bool trapped = !reports.back().ok();

    if (!trapped) {
        for (const auto& a : cli_args) {
            if (!a.is_array || a.dir == Direction::In) continue;
            if (out_format == "csv") print_array_csv(a, std::cout);
            else print_array_bin(a, std::cout);
        }
    }

    if (!report_path.empty()) {
        nlohmann::json calls = nlohmann::json::array();
        for (const auto& r : reports) calls.push_back(r.to_json());
        nlohmann::json j{{"counters", ctx.counters_json()}, {"calls", calls}};
        j["trap"] = trapped ? reports.back().to_json()["trap"] : nlohmann::json(nullptr);
        write_file(report_path, j.dump(2) + "\n");
    }
    if (trapped) {
        std::cerr << reports.back().trap->to_string() << "\n";
        return kExitTrap;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel DSL compiler and emulated-device runner"};
    app.require_subcommand(1);

    std::string file, kernel_name, types_text, output, grid_text = "1", block_text = "1";
    std::string report_path, out_format = "csv";
    std::vector<std::string> arg_specs;
    int repeat = 1;

    CLI::App* compile = app.add_subcommand("compile", "specialize a kernel and emit VPTX text");
    compile->add_option("file", file, "kernel source file (.krn)")->required();
    compile->add_option("--kernel", kernel_name, "kernel name (default: the file's only kernel)");
    compile->add_option("--types", types_text, "comma-separated argument types, e.g. f32[],f32[],i32")
        ->required();
    compile->add_option("-o,--output", output, "output path (default: stdout)");

    CLI::App* run = app.add_subcommand("run", "compile, launch, and print results");
    run->add_option("file", file, "kernel source file (.krn)")->required();
    run->add_option("--kernel", kernel_name, "kernel name (default: the file's only kernel)");
    run->add_option("--grid", grid_text, "grid dims gx[,gy[,gz]]");
    run->add_option("--block", block_text, "block dims bx[,by[,bz]]");
    run->add_option("--arg", arg_specs, "argument spec dir:type:payload (repeatable)");
    run->add_option("--report", report_path, "write a JSON launch/counter report");
    run->add_option("--out-format", out_format, "csv|bin output for out/inout arrays");
    run->add_option("--repeat", repeat, "run the same launch N times");

    CLI::App* disasm = app.add_subcommand("disasm", "parse a .vptx file and print canonical form");
    disasm->add_option("file", file, "VPTX text file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsageError;
    }

    try {
        if (compile->parsed()) return cmd_compile(file, kernel_name, types_text, output);
        if (run->parsed())
            return cmd_run(file, kernel_name, grid_text, block_text, arg_specs, report_path, out_format,
                           repeat);
        return cmd_disasm(file);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsageError;
    } catch (const SyntaxError& e) {
        std::cerr << e.what() << "\n";
        return kExitCompileError;
    } catch (const VptxSyntaxError& e) {
        std::cerr << e.what() << "\n";
        return kExitCompileError;
    } catch (const Error& e) {
        // Type errors, validation failures, driver misuse.
        std::cerr << e.what() << "\n";
        return kExitCompileError;
    }
}
