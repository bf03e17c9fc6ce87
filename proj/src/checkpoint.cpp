#include "dabc/checkpoint.hpp"

#include "dabc/errors.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace dabc {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'B', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void write_le(std::ostream& out, U value)
{
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
        bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U read_le(std::istream& in, const std::string& path)
{
    unsigned char bytes[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U)))
        throw IngestionError("truncated checkpoint " + path);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return static_cast<U>(v);
}

void write_floats(std::ostream& out, const std::vector<float>& values)
{
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    } else {
        for (float v : values)
            write_le(out, std::bit_cast<std::uint32_t>(v));
    }
}

void read_floats(std::istream& in, std::vector<float>& values, const std::string& path)
{
    if constexpr (std::endian::native == std::endian::little) {
        if (!in.read(reinterpret_cast<char*>(values.data()),
                     static_cast<std::streamsize>(values.size() * sizeof(float))))
            throw IngestionError("truncated checkpoint payload in " + path);
    } else {
        for (float& v : values)
            v = std::bit_cast<float>(read_le<std::uint32_t>(in, path));
    }
}

} // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b)
{
    return nlohmann::json(a.model) == nlohmann::json(b.model) && a.quantization == b.quantization &&
           a.schedule == b.schedule && a.seed == b.seed && a.parameters == b.parameters;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path)
{
    nlohmann::json header;
    header["model"] = ckpt.model;
    header["quantization"] = ckpt.quantization;
    header["schedule"] = {{"epoch", ckpt.schedule.epoch}, {"lr", ckpt.schedule.lr}};
    header["seed"] = ckpt.seed;
    std::uint64_t offset = 0;
    for (const auto& p : ckpt.parameters) {
        if (p.values.size() != p.shape.size())
            throw ShapeError("array " + p.name + " does not match its shape");
        header["arrays"].push_back({{"name", p.name},
                                    {"shape", {p.shape.n, p.shape.c, p.shape.h, p.shape.w}},
                                    {"offset", offset},
                                    {"dtype", "float32le"}});
        offset += p.values.size() * sizeof(float);
    }
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : ckpt.parameters)
        write_floats(out, p.values);
    if (!out)
        throw IngestionError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestionError("cannot open checkpoint " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw IngestionError("not a checkpoint file: " + path);
    const auto version = read_le<std::uint32_t>(in, path);
    if (version != kVersion)
        throw IngestionError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
    const auto header_size = read_le<std::uint64_t>(in, path);
    if (header_size > (1u << 30))
        throw IngestionError("implausible checkpoint header in " + path);
    std::string text(header_size, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_size)))
        throw IngestionError("truncated checkpoint header in " + path);

    Checkpoint ckpt;
    try {
        const auto header = nlohmann::json::parse(text);
        ckpt.model = header.at("model").get<ModelConfig>();
        ckpt.quantization = header.at("quantization").get<QuantizationSpec>();
        ckpt.schedule.epoch = header.at("schedule").at("epoch").get<int>();
        ckpt.schedule.lr = header.at("schedule").at("lr").get<double>();
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        std::uint64_t expected_offset = 0;
        for (const auto& entry : header.value("arrays", nlohmann::json::array())) {
            NamedArray a;
            a.name = entry.at("name").get<std::string>();
            const auto dims = entry.at("shape").get<std::array<int, 4>>();
            a.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
            if (entry.at("offset").get<std::uint64_t>() != expected_offset)
                throw IngestionError("non-contiguous payload for " + a.name);
            a.values.resize(a.shape.size());
            expected_offset += a.values.size() * sizeof(float);
            ckpt.parameters.push_back(std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("malformed checkpoint header in " + path + ": " + e.what());
    }
    for (auto& p : ckpt.parameters)
        read_floats(in, p.values, path);
    return ckpt;
}

template <typename T>
Checkpoint capture_checkpoint(Model<T>& model, const QuantizationSpec& spec, ScheduleState schedule,
                              std::uint64_t seed)
{
    Checkpoint ckpt;
    ckpt.model = model.config();
    ckpt.quantization = spec;
    ckpt.schedule = schedule;
    ckpt.seed = seed;
    for (const auto* p : model.parameters()) {
        NamedArray a;
        a.name = p->name;
        a.shape = p->value.shape();
        a.values.resize(p->value.size());
        for (std::size_t i = 0; i < a.values.size(); ++i)
            a.values[i] = static_cast<float>(p->value.data()[i]);
        ckpt.parameters.push_back(std::move(a));
    }
    return ckpt;
}

template <typename T>
void load_parameters(Model<T>& model, const Checkpoint& ckpt)
{
    std::map<std::string, const NamedArray*> by_name;
    for (const auto& a : ckpt.parameters)
        by_name[a.name] = &a;
    auto params = model.parameters();
    if (params.size() != ckpt.parameters.size())
        throw ShapeError("checkpoint holds " + std::to_string(ckpt.parameters.size()) + " arrays, model expects " +
                         std::to_string(params.size()));
    for (auto* p : params) {
        const auto it = by_name.find(p->name);
        if (it == by_name.end())
            throw ShapeError("checkpoint lacks parameter " + p->name);
        if (!(it->second->shape == p->value.shape()))
            throw ShapeError("parameter " + p->name + " has shape " + it->second->shape.str() + " in checkpoint, " +
                             p->value.shape().str() + " in model");
        for (std::size_t i = 0; i < p->value.size(); ++i)
            p->value.data()[i] = static_cast<T>(it->second->values[i]);
    }
}

template <typename T>
Model<T> restore_model(const Checkpoint& ckpt)
{
    ckpt.model.validate(ckpt.quantization);
    Model<T> model(ckpt.model);
    load_parameters(model, ckpt);
    return model;
}

template Checkpoint capture_checkpoint<float>(Model<float>&, const QuantizationSpec&, ScheduleState, std::uint64_t);
template Checkpoint capture_checkpoint<double>(Model<double>&, const QuantizationSpec&, ScheduleState, std::uint64_t);
template Model<float> restore_model<float>(const Checkpoint&);
template Model<double> restore_model<double>(const Checkpoint&);
template void load_parameters<float>(Model<float>&, const Checkpoint&);
template void load_parameters<double>(Model<double>&, const Checkpoint&);

} // namespace dabc
