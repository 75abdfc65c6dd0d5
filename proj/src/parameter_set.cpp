#include "fedu/parameter_set.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fedu/errors.hpp"

namespace fedu {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

// Tracks the byte offset so parse failures can name the exact position.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::size_t offset() const { return offset_; }

    void read_bytes(void* dst, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw ParseError(std::string("checkpoint: truncated while reading ") + what, offset_);
        }
        offset_ += n;
    }

    std::uint32_t read_u32(const char* what) {
        unsigned char b[4];
        read_bytes(b, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t read_u64(const char* what) {
        unsigned char b[8];
        read_bytes(b, 8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    double read_f64(const char* what) {
        std::uint64_t bits = read_u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

}  // namespace

void ParameterSet::add(std::string name, Tensor tensor) {
    if (has(name)) throw ContractError("parameter set: duplicate name '" + name + "'");
    if (!tensor.defined()) throw ContractError("parameter set: undefined tensor for '" + name + "'");
    entries_.emplace_back(std::move(name), std::move(tensor));
}

bool ParameterSet::has(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return true;
    return false;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    for (const auto& [n, t] : entries_)
        if (n == name) return t;
    throw ContractError("parameter set: no entry named '" + name + "'");
}

Tensor& ParameterSet::at(const std::string& name) {
    for (auto& [n, t] : entries_)
        if (n == name) return t;
    throw ContractError("parameter set: no entry named '" + name + "'");
}

Index ParameterSet::total_size() const {
    Index n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
}

bool ParameterSet::congruent_with(const ParameterSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].first != other.entries_[i].first) return false;
        if (entries_[i].second.shape() != other.entries_[i].second.shape()) return false;
    }
    return true;
}

void ParameterSet::require_congruent(const ParameterSet& a, const ParameterSet& b,
                                     const std::string& context) {
    if (a.entries_.size() != b.entries_.size()) {
        throw ContractError(context + ": parameter sets have " + std::to_string(a.entries_.size()) +
                            " vs " + std::to_string(b.entries_.size()) + " entries");
    }
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
        if (a.entries_[i].first != b.entries_[i].first) {
            throw ContractError(context + ": entry " + std::to_string(i) + " named '" +
                                a.entries_[i].first + "' vs '" + b.entries_[i].first + "'");
        }
        if (a.entries_[i].second.shape() != b.entries_[i].second.shape()) {
            throw ContractError(context + ": parameter '" + a.entries_[i].first + "' has shape " +
                                shape_str(a.entries_[i].second.shape()) + " vs " +
                                shape_str(b.entries_[i].second.shape()));
        }
    }
}

ParameterSet ParameterSet::clone() const {
    ParameterSet copy;
    for (const auto& [name, t] : entries_) copy.add(name, t.clone());
    return copy;
}

ParameterSet ParameterSet::clone(bool requires_grad) const {
    ParameterSet copy;
    for (const auto& [name, t] : entries_) {
        copy.add(name, Tensor::from_values(t.shape(), t.value(), requires_grad));
    }
    return copy;
}

void ParameterSet::copy_values_from(const ParameterSet& source) {
    require_congruent(*this, source, "copy_values_from");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        entries_[i].second.value() = source.entries_[i].second.value();
    }
}

Vector ParameterSet::flatten_values() const {
    Vector flat(total_size());
    Index pos = 0;
    for (const auto& [name, t] : entries_) {
        flat.segment(pos, t.size()) = t.value();
        pos += t.size();
    }
    return flat;
}

void ParameterSet::clear_grads() {
    for (auto& [name, t] : entries_) t.clear_grad();
}

void ParameterSet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("checkpoint: cannot open '" + path + "' for writing");
    write_u32(out, kCheckpointFormatVersion);
    write_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, t] : entries_) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
        for (Index d : t.shape()) write_u64(out, static_cast<std::uint64_t>(d));
        for (Index i = 0; i < t.size(); ++i) write_f64(out, t.value()[i]);
    }
    if (!out) throw ConfigError("checkpoint: write to '" + path + "' failed");
}

ParameterSet ParameterSet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("checkpoint: cannot open '" + path + "' for reading");
    Reader reader(in);
    std::uint32_t version = reader.read_u32("format version");
    if (version != kCheckpointFormatVersion) {
        throw ParseError("checkpoint: unsupported format version " + std::to_string(version), 0);
    }
    std::uint32_t count = reader.read_u32("entry count");
    ParameterSet set;
    for (std::uint32_t e = 0; e < count; ++e) {
        std::uint32_t name_len = reader.read_u32("name length");
        std::string name(name_len, '\0');
        if (name_len > 0) reader.read_bytes(name.data(), name_len, "name");
        std::uint32_t rank = reader.read_u32("rank");
        Shape shape(rank);
        Index total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::uint64_t dim = reader.read_u64("dimension");
            if (dim == 0 || dim > (1ull << 32)) {
                throw ParseError("checkpoint: implausible dimension " + std::to_string(dim) +
                                     " in entry '" + name + "'",
                                 reader.offset() - 8);
            }
            shape[d] = static_cast<Index>(dim);
            total *= shape[d];
        }
        Vector values(total);
        for (Index i = 0; i < total; ++i) values[i] = reader.read_f64("values");
        set.add(std::move(name), Tensor::from_values(std::move(shape), std::move(values), false));
    }
    if (!reader.at_eof()) {
        throw ParseError("checkpoint: trailing bytes after last entry", reader.offset());
    }
    return set;
}

}  // namespace fedu
