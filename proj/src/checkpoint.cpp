#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tbp/error.hpp"
#include "tbp/nn.hpp"

namespace tbp::nn {

namespace {
constexpr const char* kMagic = "tbp-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out << kMagic << ' ' << kVersion << '\n';
    for (const auto& [k, v] : ck.meta) {
        if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw Error("checkpoint meta entries must be single tokens/lines: " + k);
        out << "meta " << k << ' ' << v << '\n';
    }
    char buf[64];
    for (const auto& [name, t] : ck.tensors) {
        out << "tensor " << name << ' ' << t.rank();
        for (std::size_t d : t.shape()) out << ' ' << d;
        out << '\n';
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%a", t[i]);
            out << buf << ((i + 1) % 8 == 0 || i + 1 == t.size() ? '\n' : ' ');
        }
    }
    out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
    Checkpoint ck;
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic)
        throw Error("not a tbp checkpoint");
    if (version != kVersion)
        throw Error("unsupported checkpoint version " + std::to_string(version));
    std::string tag;
    while (in >> tag) {
        if (tag == "end") return ck;
        if (tag == "meta") {
            std::string key, value;
            in >> key;
            std::getline(in >> std::ws, value);
            ck.meta[key] = value;
        } else if (tag == "tensor") {
            std::string name;
            std::size_t rank = 0;
            in >> name >> rank;
            if (!in || rank < 1 || rank > 2) throw Error("checkpoint: bad tensor header " + name);
            std::vector<std::size_t> shape(rank);
            std::size_t n = 1;
            for (auto& d : shape) {
                in >> d;
                n *= d;
            }
            std::vector<double> values(n);
            std::string tok;
            for (auto& v : values) {
                if (!(in >> tok)) throw Error("checkpoint: truncated tensor " + name);
                char* end = nullptr;
                v = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str() || *end != '\0')
                    throw Error("checkpoint: bad value in tensor " + name);
            }
            ck.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
        } else {
            throw Error("checkpoint: unexpected token " + tag);
        }
    }
    throw Error("checkpoint: missing end marker");
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open checkpoint for writing: " + path);
    write_checkpoint(out, ck);
    if (!out) throw Error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint: " + path);
    return read_checkpoint(in);
}

}  // namespace tbp::nn
