#include "seqcomm/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace seqcomm::cli {

void save_checkpoint(nn::Networks& nets, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    auto named = nets.named_params();
    out << "seqcomm-ckpt-v1\n" << named.size() << "\n";
    out << std::setprecision(17);
    for (auto& [name, p] : named) {
        out << name << " " << p->shape.size();
        for (int d : p->shape) out << " " << d;
        out << "\n";
        for (int i = 0; i < p->size(); ++i) out << p->value[i] << (i + 1 < p->size() ? ' ' : '\n');
        if (p->size() == 0) out << "\n";
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

void load_checkpoint(nn::Networks& nets, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "seqcomm-ckpt-v1")
        throw std::runtime_error("load_checkpoint: bad format header in " + path);
    size_t count = 0;
    in >> count;
    auto named = nets.named_params();
    if (count != named.size())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    for (auto& [name, p] : named) {
        std::string fname;
        size_t ndims;
        in >> fname >> ndims;
        if (fname != name)
            throw std::runtime_error("load_checkpoint: expected parameter '" + name +
                                     "', found '" + fname + "'");
        if (ndims != p->shape.size())
            throw std::runtime_error("load_checkpoint: rank mismatch for " + name);
        for (size_t d = 0; d < ndims; ++d) {
            int dim;
            in >> dim;
            if (dim != p->shape[d])
                throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
        }
        for (int i = 0; i < p->size(); ++i) in >> p->value[i];
    }
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
}

}  // namespace seqcomm::cli
