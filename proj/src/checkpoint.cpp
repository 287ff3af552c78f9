#include "lavarnet/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "lavarnet/errors.hpp"

namespace lavarnet {

namespace {

std::string expect_keyword(std::istream& in, std::string_view keyword) {
    std::string word;
    if (!(in >> word) || word != keyword)
        throw DataError(fmt::format("checkpoint: expected '{}', found '{}'", keyword, word));
    return word;
}

template <typename T>
T read_value(std::istream& in, std::string_view what) {
    T value{};
    if (!(in >> value)) throw DataError(fmt::format("checkpoint: cannot read {}", what));
    return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params) {
    const ModelDims& d = params.dims();
    fmt::print(out, "format {}\n", kCheckpointFormat);
    fmt::print(out, "variant {}\n", to_string(params.variant()));
    fmt::print(out, "dims {} {} {} {}\n", d.n, d.T, d.K, d.K_out);
    for (const NamedTensor& t : params.tensors()) {
        const Shape& s = t.value.shape();
        if (s.rank() == 1)
            fmt::print(out, "tensor {} 1 {}\n", t.name, s.dim(0));
        else
            fmt::print(out, "tensor {} 2 {} {}\n", t.name, s.dim(0), s.dim(1));
        const std::size_t cols = s.cols();
        const auto values = t.value.values();
        for (std::size_t i = 0; i < values.size(); ++i)
            fmt::print(out, "{:.17g}{}", values[i], (i + 1) % cols == 0 ? "\n" : " ");
    }
    fmt::print(out, "end\n");
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write checkpoint '{}'", path.string()));
    write_checkpoint(out, params);
    if (!out) throw DataError(fmt::format("failed writing checkpoint '{}'", path.string()));
}

ModelParams read_checkpoint(std::istream& in) {
    expect_keyword(in, "format");
    const auto format = read_value<std::string>(in, "format tag");
    if (format != kCheckpointFormat)
        throw DataError(fmt::format("checkpoint: unsupported format '{}'", format));
    expect_keyword(in, "variant");
    Variant variant;
    try {
        variant = parse_variant(read_value<std::string>(in, "variant"));
    } catch (const ContractError& e) {
        throw DataError(fmt::format("checkpoint: {}", e.what()));
    }
    expect_keyword(in, "dims");
    ModelDims dims;
    dims.n = read_value<std::size_t>(in, "n");
    dims.T = read_value<std::size_t>(in, "T");
    dims.K = read_value<std::size_t>(in, "K");
    dims.K_out = read_value<std::size_t>(in, "K_out");

    std::vector<NamedTensor> tensors;
    for (;;) {
        const auto word = read_value<std::string>(in, "section keyword");
        if (word == "end") break;
        if (word != "tensor")
            throw DataError(fmt::format("checkpoint: expected 'tensor' or 'end', found '{}'", word));
        NamedTensor t;
        t.name = read_value<std::string>(in, "tensor name");
        const auto rank = read_value<std::size_t>(in, "rank");
        Shape shape;
        if (rank == 1) {
            shape = Shape(read_value<std::size_t>(in, "length"));
        } else if (rank == 2) {
            const auto rows = read_value<std::size_t>(in, "rows");
            shape = Shape(rows, read_value<std::size_t>(in, "cols"));
        } else {
            throw DataError(fmt::format("checkpoint: tensor '{}' has rank {}", t.name, rank));
        }
        if (shape.size() == 0)
            throw DataError(fmt::format("checkpoint: tensor '{}' is empty", t.name));
        std::vector<double> values(shape.size());
        for (double& v : values) {
            std::string token = read_value<std::string>(in, fmt::format("values of '{}'", t.name));
            std::size_t used = 0;
            try {
                v = std::stod(token, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != token.size())
                throw DataError(fmt::format("checkpoint: bad value '{}' in '{}'", token, t.name));
        }
        t.value = Tensor(shape, std::move(values));
        tensors.push_back(std::move(t));
    }
    try {
        return ModelParams(variant, dims, std::move(tensors));
    } catch (const ContractError& e) {
        throw DataError(fmt::format("checkpoint: {}", e.what()));
    }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open checkpoint '{}'", path.string()));
    return read_checkpoint(in);
}

}  // namespace lavarnet
