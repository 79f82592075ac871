#include "latent/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "latent/error.hpp"

namespace latent {

namespace {

constexpr const char* kMagic = "latent-atlas-model";
constexpr int kFormatVersion = 1;

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Whitespace-separated tokens with the 1-based line each came from.
class TokenReader {
public:
    explicit TokenReader(std::istream& in) : in_(in) {}

    std::string word() {
        std::string w;
        while (!(current_ >> w)) {
            std::string text;
            if (!std::getline(in_, text)) throw ParseError(line_ + 1, "model file truncated");
            ++line_;
            current_ = std::istringstream(text);
        }
        return w;
    }

    void expect(const std::string& keyword) {
        const std::string w = word();
        if (w != keyword) throw ParseError(line_, "model file: expected '" + keyword + "', found '" + w + "'");
    }

    template <typename T>
    T number() {
        const std::string w = word();
        std::istringstream ss(w);
        T value{};
        if (!(ss >> value) || !ss.eof()) throw ParseError(line_, "model file: bad number '" + w + "'");
        return value;
    }

    [[noreturn]] void error(const std::string& message) const { throw ParseError(line_, message); }

private:
    std::istream& in_;
    std::istringstream current_;
    std::size_t line_ = 0;
};

}  // namespace

void write_model(std::ostream& out, const DenseHead& model) {
    const HeadConfig& c = model.config();
    out << kMagic << ' ' << kFormatVersion << '\n';
    out << "input_dim " << c.input_dim << '\n';
    out << "hidden_dims " << c.hidden_dims.size();
    for (std::size_t h : c.hidden_dims) out << ' ' << h;
    out << '\n';
    out << "seed " << c.seed << '\n';
    out << "learning_rate " << format_real(c.learning_rate) << '\n';
    out << "epochs " << c.epochs << '\n';
    out << "batch_size " << c.batch_size << '\n';
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const LayerShape& s = model.shape(l);
        out << "layer " << l << ' ' << s.outputs << ' ' << s.inputs << '\n';
        for (std::size_t r = 0; r < s.outputs; ++r) {
            const auto row = model.weight_row(l, r);
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << format_real(row[i]);
            out << '\n';
        }
        const auto b = model.biases(l);
        for (std::size_t i = 0; i < b.size(); ++i) out << (i ? " " : "") << format_real(b[i]);
        out << '\n';
    }
    out << "end\n";
}

DenseHead read_model(std::istream& in) {
    TokenReader reader(in);
    reader.expect(kMagic);
    const int version = reader.number<int>();
    if (version != kFormatVersion) reader.error("unsupported model format version " + std::to_string(version));

    HeadConfig c;
    reader.expect("input_dim");
    c.input_dim = reader.number<std::size_t>();
    reader.expect("hidden_dims");
    const auto count = reader.number<std::size_t>();
    if (count < 1 || count >= 1024) reader.error("model file: bad hidden layer count");
    for (std::size_t i = 0; i < count; ++i) c.hidden_dims.push_back(reader.number<std::size_t>());
    reader.expect("seed");
    c.seed = reader.number<std::uint64_t>();
    reader.expect("learning_rate");
    c.learning_rate = reader.number<double>();
    reader.expect("epochs");
    c.epochs = reader.number<std::size_t>();
    reader.expect("batch_size");
    c.batch_size = reader.number<std::size_t>();

    // Shapes come from the config; the per-layer headers are cross-checked.
    const DenseHead shape_probe = DenseHead::zeros(c);
    Vec params(shape_probe.parameter_count());
    for (std::size_t l = 0; l < shape_probe.layer_count(); ++l) {
        const LayerShape& s = shape_probe.shape(l);
        reader.expect("layer");
        const auto index = reader.number<std::size_t>();
        const auto outputs = reader.number<std::size_t>();
        const auto inputs = reader.number<std::size_t>();
        if (index != l || outputs != s.outputs || inputs != s.inputs) {
            reader.error("model file: layer " + std::to_string(l) + " header does not match config");
        }
        for (std::size_t i = 0; i < s.outputs * s.inputs; ++i) params[s.weight_offset + i] = reader.number<double>();
        for (std::size_t i = 0; i < s.outputs; ++i) params[s.bias_offset + i] = reader.number<double>();
    }
    reader.expect("end");
    return DenseHead(std::move(c), std::move(params));
}

void save_model(const std::filesystem::path& path, const DenseHead& model) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write model file " + path.string());
    write_model(out, model);
    require(static_cast<bool>(out), ErrorKind::Io, "error writing model file " + path.string());
}

DenseHead load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open model file " + path.string());
    return read_model(in);
}

}  // namespace latent
