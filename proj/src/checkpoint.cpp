#include "searchlab/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace searchlab {

namespace {

constexpr char kMagic[] = "searchlab-checkpoint v1";

// Checkpoints are defined as little-endian on disk; this code asserts the
// host matches rather than byte-swapping (all supported targets are LE).
void assert_little_endian() {
    const std::uint16_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    if (b != 1) throw io_error("checkpoint io requires a little-endian host");
}

}  // namespace

void save_tensors(const std::string& path, const json& meta,
                  const std::vector<NamedTensor>& tensors) {
    assert_little_endian();
    std::ostringstream header;
    header << kMagic << "\n";
    header << "meta " << meta.dump() << "\n";
    std::size_t offset = 0;
    for (const auto& t : tensors) {
        if (t.name.find(' ') != std::string::npos || t.name.find('\n') != std::string::npos)
            throw io_error("tensor name contains whitespace: " + t.name);
        if (t.data.size() != std::size_t(t.rows) * std::size_t(t.cols))
            throw io_error("tensor shape does not match data size: " + t.name);
        header << "tensor " << t.name << " " << t.rows << " " << t.cols << " " << offset << "\n";
        offset += t.data.size();
    }
    header << "data " << offset << "\n";

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open checkpoint for writing: " + path);
    std::string h = header.str();
    f.write(h.data(), std::streamsize(h.size()));
    for (const auto& t : tensors)
        f.write(reinterpret_cast<const char*>(t.data.data()),
                std::streamsize(t.data.size() * sizeof(double)));
    if (!f) throw io_error("failed writing checkpoint: " + path);
}

const NamedTensor* CheckpointContents::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

CheckpointContents load_tensors(const std::string& path) {
    assert_little_endian();
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open checkpoint: " + path);

    CheckpointContents out;
    std::string line;
    if (!std::getline(f, line) || line != kMagic) throw io_error("not a checkpoint file: " + path);

    struct Entry {
        std::string name;
        int rows, cols;
        std::size_t offset;
    };
    std::vector<Entry> entries;
    std::size_t total = 0;
    bool saw_data = false;
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string rest;
            std::getline(ls, rest);
            out.meta = json::parse(rest);
        } else if (tag == "tensor") {
            Entry e;
            if (!(ls >> e.name >> e.rows >> e.cols >> e.offset))
                throw io_error("bad tensor line in checkpoint: " + path);
            entries.push_back(e);
        } else if (tag == "data") {
            if (!(ls >> total)) throw io_error("bad data line in checkpoint: " + path);
            saw_data = true;
            break;
        } else {
            throw io_error("unknown checkpoint header line: " + line);
        }
    }
    if (!saw_data) throw io_error("checkpoint missing data marker: " + path);

    std::vector<double> blob(total);
    f.read(reinterpret_cast<char*>(blob.data()), std::streamsize(total * sizeof(double)));
    if (std::size_t(f.gcount()) != total * sizeof(double))
        throw io_error("checkpoint truncated: " + path);

    for (const auto& e : entries) {
        NamedTensor t;
        t.name = e.name;
        t.rows = e.rows;
        t.cols = e.cols;
        std::size_t n = std::size_t(e.rows) * std::size_t(e.cols);
        if (e.offset + n > total) throw io_error("tensor out of bounds in checkpoint: " + e.name);
        t.data.assign(blob.begin() + long(e.offset), blob.begin() + long(e.offset + n));
        out.tensors.push_back(std::move(t));
    }
    return out;
}

void save_model(const std::string& path, const ModelParams& params,
                const std::vector<NamedTensor>& extra) {
    json meta{{"arch", arch_to_json(params.arch)}, {"vocab_size", params.vocab_size}};
    std::vector<NamedTensor> tensors;
    for (const auto& spec : params.layout.tensors) {
        NamedTensor t;
        t.name = spec.name;
        t.rows = spec.rows;
        t.cols = spec.cols;
        const double* src = params.data.data() + spec.offset;
        t.data.assign(src, src + spec.size());
        tensors.push_back(std::move(t));
    }
    tensors.insert(tensors.end(), extra.begin(), extra.end());
    save_tensors(path, meta, tensors);
}

ModelParams load_model(const CheckpointContents& contents) {
    ModelParams p;
    p.arch = arch_from_json(contents.meta.at("arch"));
    p.vocab_size = contents.meta.at("vocab_size").get<int>();
    p.layout = ParamLayout::build(p.arch, p.vocab_size);
    p.data.assign(p.layout.total_elements, 0.0);
    for (const auto& spec : p.layout.tensors) {
        const NamedTensor* t = contents.find(spec.name);
        if (!t) throw io_error("checkpoint missing tensor: " + spec.name);
        if (t->rows != spec.rows || t->cols != spec.cols)
            throw io_error("checkpoint tensor shape mismatch: " + spec.name);
        std::memcpy(p.data.data() + spec.offset, t->data.data(), t->data.size() * sizeof(double));
    }
    return p;
}

ModelParams load_model(const std::string& path) { return load_model(load_tensors(path)); }

}  // namespace searchlab
