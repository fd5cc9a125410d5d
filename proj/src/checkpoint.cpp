#include "ts2rep/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ts2rep::checkpoint {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw DataError("checkpoint: truncated file");
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(buf[pos] | (buf[pos + 1] << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace

std::vector<uint8_t> to_bytes(const encoder::EncoderParams<float>& params) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'T', 'S', '2', 'V'});
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(params.named.size()));
    for (const auto& [name, t] : params.named) {
        if (name.size() > 0xffff) throw ArgumentError("checkpoint: parameter name too long");
        put_u16(out, static_cast<uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<uint8_t>(t->shape.size()));
        for (int64_t d : t->shape) put_u32(out, static_cast<uint32_t>(d));
        const size_t off = out.size();
        out.resize(off + t->data.size() * sizeof(float));
        std::memcpy(out.data() + off, t->data.data(), t->data.size() * sizeof(float));
    }
    return out;
}

encoder::EncoderParams<float> from_bytes(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    if (r.str(4) != "TS2V") throw DataError("checkpoint: bad magic, not a TS2V file");
    const uint32_t version = r.u32();
    if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t count = r.u32();

    encoder::EncoderParams<float> params;
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str(r.u16());
        const uint8_t ndims = r.u8();
        tensor::Shape shape(ndims);
        for (uint8_t d = 0; d < ndims; ++d) shape[d] = static_cast<int64_t>(r.u32());
        auto t = tensor::make_tensor<float>(shape, false);
        const size_t nbytes = t->data.size() * sizeof(float);
        r.need(nbytes);
        std::memcpy(t->data.data(), bytes.data() + r.pos, nbytes);
        r.pos += nbytes;
        params.named.emplace_back(name, std::move(t));
    }
    if (r.pos != bytes.size()) throw DataError("checkpoint: trailing bytes after last parameter");

    // Reconstruct the architecture from parameter names and shapes.
    const auto proj_w = params.find("proj.W");
    if (proj_w->shape.size() != 2) throw DataError("checkpoint: proj.W must be 2-D");
    params.config.hidden_dims = proj_w->shape[0];
    params.config.input_dims = proj_w->shape[1];
    int64_t depth = -1;
    for (const auto& [name, t] : params.named) {
        if (name.rfind("block", 0) == 0) {
            const size_t dot = name.find('.');
            depth = std::max(depth, static_cast<int64_t>(std::stoll(name.substr(5, dot - 5))));
        }
    }
    if (depth < 1) throw DataError("checkpoint: no residual blocks found");
    params.config.depth = depth;  // block `depth` is the output block
    params.config.output_dims = params.find("block" + std::to_string(depth) + ".conv2.k")->shape[0];
    params.config.validate();
    return params;
}

void save(const encoder::EncoderParams<float>& params, const std::string& path) {
    const auto bytes = to_bytes(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("checkpoint: write failed for '" + path + "'");
}

encoder::EncoderParams<float> load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint: cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

}  // namespace ts2rep::checkpoint
