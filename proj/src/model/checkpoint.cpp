#include "loyalty/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "loyalty/errors.hpp"

namespace loyalty::model {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        require(sizeof(T), what);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string_view take(std::size_t n, const char* what) {
        require(n, what);
        std::string_view v(bytes_.data() + pos_, n);
        pos_ += n;
        return v;
    }

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void require(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("truncated checkpoint while reading ") + what, pos_);
        }
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const ClassifierModel& model) {
    nlohmann::json header;
    header["config"] = model.config();
    header["provenance"] = model.provenance();
    header["int8_final"] = model.int8_final();
    nlohmann::json gates = nlohmann::json::array();
    for (const auto& layer : model.layers()) gates.push_back(layer.gates);
    header["gates"] = gates;
    nlohmann::json tensors = nlohmann::json::array();
    for (const nn::Parameter* p : model.parameters()) {
        tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}});
    }
    header["tensors"] = tensors;
    nlohmann::json quant = nlohmann::json::array();
    model.for_each_linear([&](const std::string& name, const Linear& lin) {
        if (!lin.quant) return;
        quant.push_back({{"name", name},
                         {"rows", lin.quant->rows},
                         {"cols", lin.quant->cols},
                         {"scale", lin.quant->scale},
                         {"quantize_activations", lin.quant->quantize_activations},
                         {"calibrated_absmax", lin.quant->calibrated_absmax}});
    });
    header["int8"] = quant;

    const std::string text = header.dump();
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out += text;
    for (const nn::Parameter* p : model.parameters()) {
        out.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * sizeof(double));
    }
    model.for_each_linear([&](const std::string&, const Linear& lin) {
        if (lin.quant) {
            out.append(reinterpret_cast<const char*>(lin.quant->weights.data()),
                       lin.quant->weights.size());
        }
    });
    return out;
}

namespace {

ClassifierModel deserialize_impl(const std::string& bytes) {
    Reader r(bytes);
    const auto magic = r.take(sizeof(kCheckpointMagic), "magic");
    if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw FormatError("not a checkpoint: bad magic bytes", 0);
    }
    const std::size_t version_at = r.offset();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
    }
    const auto header_len = r.get<std::uint64_t>("header length");
    const std::size_t header_at = r.offset();
    const auto text = r.take(header_len, "header");

    nlohmann::json header;
    ModelConfig config;
    try {
        header = nlohmann::json::parse(text);
        config = header.at("config").get<ModelConfig>();
        config.validate();
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what(),
                          header_at + e.byte);
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid checkpoint header: ") + e.what(), header_at);
    }

    Rng unused(0);
    ClassifierModel model = ClassifierModel::random(config, unused);
    try {
        model.set_provenance(header.at("provenance").get<std::string>());
        model.set_int8_final(header.at("int8_final").get<bool>());
        const auto& gates = header.at("gates");
        if (gates.size() != model.num_layers()) throw FormatError("gate table size", header_at);
        for (std::size_t l = 0; l < model.num_layers(); ++l) {
            auto g = gates[l].get<std::vector<double>>();
            if (g.size() != config.heads) throw FormatError("gate row size", header_at);
            for (std::size_t h = 0; h < g.size(); ++h) model.set_gate(l, h, g[h]);
        }
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception& e) {
        throw FormatError(std::string("invalid checkpoint header: ") + e.what(), header_at);
    }

    const auto& table = header.at("tensors");
    auto params = model.parameters();
    if (table.size() != params.size()) {
        throw FormatError("tensor table lists " + std::to_string(table.size()) +
                              " tensors, expected " + std::to_string(params.size()),
                          header_at);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (table[i].at("name").get<std::string>() != params[i]->name ||
            table[i].at("shape").get<std::vector<std::size_t>>() != params[i]->value.shape()) {
            throw FormatError("tensor table entry " + std::to_string(i) + " does not match " +
                                  params[i]->name,
                              header_at);
        }
        const auto raw = r.take(params[i]->value.size() * sizeof(double), params[i]->name.c_str());
        std::memcpy(params[i]->value.data(), raw.data(), raw.size());
    }

    std::vector<nlohmann::json> quant_entries = header.at("int8").get<std::vector<nlohmann::json>>();
    std::size_t qi = 0;
    model.for_each_linear([&](const std::string& name, Linear& lin) {
        if (qi >= quant_entries.size() || quant_entries[qi].at("name").get<std::string>() != name) {
            return;
        }
        const auto& e = quant_entries[qi++];
        nn::QuantizedLinear q;
        q.rows = e.at("rows").get<std::size_t>();
        q.cols = e.at("cols").get<std::size_t>();
        q.scale = e.at("scale").get<double>();
        q.quantize_activations = e.at("quantize_activations").get<bool>();
        q.calibrated_absmax = e.at("calibrated_absmax").get<double>();
        if (q.rows != lin.weight.value.rows() || q.cols != lin.weight.value.cols()) {
            throw FormatError("int8 table entry " + name + " has the wrong shape", header_at);
        }
        const auto raw = r.take(q.rows * q.cols, name.c_str());
        q.weights.resize(raw.size());
        std::memcpy(q.weights.data(), raw.data(), raw.size());
        for (auto w : q.weights) {
            if (w < -nn::kInt8Max) throw FormatError("int8 weight outside [-127, 127]", r.offset());
        }
        q.widen();
        lin.quant = std::move(q);
    });
    if (qi != quant_entries.size()) {
        throw FormatError("int8 table names an unknown or out-of-order layer", header_at);
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint payload", r.offset());
    return model;
}

}  // namespace

ClassifierModel deserialize(const std::string& bytes) {
    try {
        return deserialize_impl(bytes);
    } catch (const nlohmann::json::exception& e) {
        // Header fields of the wrong type or missing; the header starts after
        // magic, version and length.
        throw FormatError(std::string("invalid checkpoint header: ") + e.what(), 20);
    }
}

void save(const ClassifierModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::string bytes = serialize(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

ClassifierModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

}  // namespace loyalty::model
