#include "mergelab/tensor_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <nlohmann/json.hpp>
#include <set>

#include "mergelab/error.hpp"

namespace mergelab {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kMetadataKey = "__metadata__";

std::string errno_text() { return std::strerror(errno); }

bool checked_numel(std::span<const std::uint64_t> shape, std::uint64_t& out) {
    std::uint64_t n = 1;
    for (const auto d : shape) {
        if (__builtin_mul_overflow(n, d, &n)) return false;
    }
    out = n;
    return true;
}

std::uint64_t load_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void pread_exact(int fd, std::uint64_t offset, std::span<std::uint8_t> out, const std::filesystem::path& path) {
    std::size_t done = 0;
    while (done < out.size()) {
        const ssize_t got = ::pread(fd, out.data() + done, out.size() - done,
                                    static_cast<off_t>(offset + done));
        if (got < 0) {
            if (errno == EINTR) continue;
            throw IoError("read failed on " + path.string() + ": " + errno_text());
        }
        if (got == 0) throw FormatError("truncated file: " + path.string());
        done += static_cast<std::size_t>(got);
    }
}

std::uint64_t as_uint(const ordered_json& v, const std::string& what) {
    if (!v.is_number_unsigned()) {
        // number_integer with a non-negative value is accepted as well
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
        throw FormatError(what + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

TensorMeta parse_entry(const std::string& name, const ordered_json& entry) {
    if (name.empty()) throw FormatError("tensor name must be non-empty");
    if (!entry.is_object()) throw FormatError("header entry '" + name + "' is not an object");

    TensorMeta meta;
    meta.name = name;

    const auto dtype_it = entry.find("dtype");
    if (dtype_it == entry.end() || !dtype_it->is_string()) {
        throw FormatError("tensor '" + name + "' has no dtype");
    }
    const auto tag = dtype_it->get<std::string>();
    const auto dtype = parse_dtype(tag);
    if (!dtype) throw FormatError("unknown dtype tag '" + tag + "' for tensor '" + name + "'");
    meta.dtype = *dtype;

    const auto shape_it = entry.find("shape");
    if (shape_it == entry.end() || !shape_it->is_array()) {
        throw FormatError("tensor '" + name + "' has no shape");
    }
    for (const auto& d : *shape_it) meta.shape.push_back(as_uint(d, "shape of '" + name + "'"));

    const auto off_it = entry.find("data_offsets");
    if (off_it == entry.end() || !off_it->is_array() || off_it->size() != 2) {
        throw FormatError("tensor '" + name + "' needs data_offsets [begin, end]");
    }
    meta.begin = as_uint((*off_it)[0], "data_offsets of '" + name + "'");
    meta.end = as_uint((*off_it)[1], "data_offsets of '" + name + "'");
    if (meta.end < meta.begin) throw FormatError("tensor '" + name + "' has end < begin");

    std::uint64_t numel = 0;
    std::uint64_t expected = 0;
    if (!checked_numel(meta.shape, numel) ||
        __builtin_mul_overflow(numel, static_cast<std::uint64_t>(dtype_size(meta.dtype)), &expected)) {
        throw FormatError("tensor '" + name + "' shape overflows");
    }
    if (meta.byte_length() != expected) {
        throw FormatError("tensor '" + name + "' byte range holds " + std::to_string(meta.byte_length()) +
                          " bytes, shape and dtype need " + std::to_string(expected));
    }
    return meta;
}

}  // namespace

std::uint64_t element_count(std::span<const std::uint64_t> shape) noexcept {
    std::uint64_t n = 1;
    for (const auto d : shape) n *= d;
    return n;
}

// ---------------------------------------------------------------- Checkpoint

void Checkpoint::add(Tensor tensor) {
    if (tensor.name.empty()) throw ArgumentError("tensor name must be non-empty");
    if (index_.contains(tensor.name)) throw ArgumentError("duplicate tensor name '" + tensor.name + "'");
    std::uint64_t numel = 0;
    if (!checked_numel(tensor.shape, numel) || numel * dtype_size(tensor.dtype) != tensor.bytes.size()) {
        throw ArgumentError("tensor '" + tensor.name + "' has " + std::to_string(tensor.bytes.size()) +
                            " bytes, inconsistent with its dtype and shape");
    }
    index_.emplace(tensor.name, tensors_.size());
    tensors_.push_back(std::move(tensor));
}

const Tensor& Checkpoint::at(const std::string& name) const {
    const auto* t = find(name);
    if (t == nullptr) throw ArgumentError("no tensor named '" + name + "'");
    return *t;
}

const Tensor* Checkpoint::find(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : &tensors_[it->second];
}

bool operator==(const Checkpoint& a, const Checkpoint& b) {
    if (a.metadata != b.metadata || a.tensors_.size() != b.tensors_.size()) return false;
    return std::all_of(a.tensors_.begin(), a.tensors_.end(), [&](const Tensor& t) {
        const auto* other = b.find(t.name);
        return other != nullptr && *other == t;
    });
}

std::vector<float> tensor_as_f32(const TensorMeta& meta, std::span<const std::uint8_t> bytes) {
    if (bytes.size() != meta.byte_length() || bytes.size() != meta.numel() * dtype_size(meta.dtype)) {
        throw ArgumentError("tensor '" + meta.name + "': byte length " + std::to_string(bytes.size()) +
                            " does not match its metadata");
    }
    std::vector<float> out(meta.numel());
    decode_to_f32(meta.dtype, bytes, out);
    return out;
}

std::vector<float> tensor_as_f32(const Tensor& tensor) {
    std::vector<float> out(tensor.numel());
    decode_to_f32(tensor.dtype, tensor.bytes, out);
    return out;
}

// ---------------------------------------------------------------- reader

CheckpointReader::CheckpointReader(const std::filesystem::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0) throw IoError("cannot open " + path.string() + ": " + errno_text());

    try {
        struct stat st {};
        if (::fstat(fd_, &st) != 0) throw IoError("cannot stat " + path.string() + ": " + errno_text());
        file_size_ = static_cast<std::uint64_t>(st.st_size);

        if (file_size_ < 8) throw FormatError("truncated file: " + path.string() + " is shorter than 8 bytes");
        std::uint8_t prefix[8];
        pread_exact(fd_, 0, prefix, path_);
        const std::uint64_t header_len = load_u64_le(prefix);
        if (header_len > file_size_ - 8) {
            throw FormatError("truncated file: header length " + std::to_string(header_len) + " exceeds the " +
                              std::to_string(file_size_ - 8) + " bytes after the prefix");
        }
        data_offset_ = 8 + header_len;
        const std::uint64_t data_size = file_size_ - data_offset_;

        std::string header(header_len, '\0');
        pread_exact(fd_, 8, {reinterpret_cast<std::uint8_t*>(header.data()), header.size()}, path_);

        std::set<std::string> seen;
        std::string duplicate;
        const ordered_json::parser_callback_t watch_keys = [&](int depth, ordered_json::parse_event_t event,
                                                               ordered_json& parsed) {
            if (event == ordered_json::parse_event_t::key && depth == 1) {
                const auto key = parsed.get<std::string>();
                if (!seen.insert(key).second && duplicate.empty()) duplicate = key;
            }
            return true;
        };
        ordered_json doc;
        try {
            doc = ordered_json::parse(header, watch_keys);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("header is not valid UTF-8 JSON: " + std::string(e.what()));
        }
        if (!duplicate.empty()) throw FormatError("duplicate tensor name '" + duplicate + "'");
        if (!doc.is_object()) throw FormatError("header is not a JSON object");

        for (const auto& [key, value] : doc.items()) {
            if (key == kMetadataKey) {
                if (!value.is_object()) throw FormatError("__metadata__ must be an object");
                for (const auto& [mk, mv] : value.items()) {
                    if (!mv.is_string()) throw FormatError("__metadata__ value for '" + mk + "' is not a string");
                    metadata_.emplace(mk, mv.get<std::string>());
                }
                continue;
            }
            auto meta = parse_entry(key, value);
            if (meta.end > data_size) {
                throw FormatError("tensor '" + key + "' byte range [" + std::to_string(meta.begin) + ", " +
                                  std::to_string(meta.end) + ") is out of bounds (data section has " +
                                  std::to_string(data_size) + " bytes)");
            }
            index_.emplace(meta.name, entries_.size());
            entries_.push_back(std::move(meta));
        }

        std::vector<const TensorMeta*> by_offset;
        for (const auto& m : entries_) {
            if (m.byte_length() > 0) by_offset.push_back(&m);
        }
        std::sort(by_offset.begin(), by_offset.end(),
                  [](const TensorMeta* a, const TensorMeta* b) { return a->begin < b->begin; });
        for (std::size_t i = 1; i < by_offset.size(); ++i) {
            if (by_offset[i]->begin < by_offset[i - 1]->end) {
                throw FormatError("byte ranges of '" + by_offset[i - 1]->name + "' and '" + by_offset[i]->name +
                                  "' overlap");
            }
        }
    } catch (...) {
        ::close(fd_);
        fd_ = -1;
        throw;
    }
}

CheckpointReader::~CheckpointReader() {
    if (fd_ >= 0) ::close(fd_);
}

CheckpointReader::CheckpointReader(CheckpointReader&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      file_size_(other.file_size_),
      data_offset_(other.data_offset_),
      entries_(std::move(other.entries_)),
      index_(std::move(other.index_)),
      metadata_(std::move(other.metadata_)) {}

CheckpointReader& CheckpointReader::operator=(CheckpointReader&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        path_ = std::move(other.path_);
        fd_ = std::exchange(other.fd_, -1);
        file_size_ = other.file_size_;
        data_offset_ = other.data_offset_;
        entries_ = std::move(other.entries_);
        index_ = std::move(other.index_);
        metadata_ = std::move(other.metadata_);
    }
    return *this;
}

const TensorMeta& CheckpointReader::meta(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("no tensor named '" + name + "' in " + path_.string());
    return entries_[it->second];
}

std::vector<std::uint8_t> CheckpointReader::read_bytes(const TensorMeta& meta) const {
    std::vector<std::uint8_t> out(meta.byte_length());
    read_range(meta, 0, out);
    return out;
}

void CheckpointReader::read_range(const TensorMeta& meta, std::uint64_t offset, std::span<std::uint8_t> out) const {
    if (offset > meta.byte_length() || out.size() > meta.byte_length() - offset) {
        throw ArgumentError("read past the end of tensor '" + meta.name + "'");
    }
    pread_exact(fd_, data_offset_ + meta.begin + offset, out, path_);
}

Tensor CheckpointReader::read_tensor(const std::string& name) const {
    const auto& m = meta(name);
    return Tensor{m.name, m.dtype, m.shape, read_bytes(m)};
}

Checkpoint CheckpointReader::read_all() const {
    Checkpoint ckpt;
    for (const auto& m : entries_) ckpt.add(Tensor{m.name, m.dtype, m.shape, read_bytes(m)});
    ckpt.metadata = metadata_;
    return ckpt;
}

// ---------------------------------------------------------------- writer

std::string serialize_header(const std::vector<TensorMeta>& entries,
                             const std::map<std::string, std::string>& metadata) {
    ordered_json doc = ordered_json::object();
    if (!metadata.empty()) {
        ordered_json meta = ordered_json::object();
        for (const auto& [k, v] : metadata) meta[k] = v;
        doc[std::string(kMetadataKey)] = std::move(meta);
    }
    for (const auto& e : entries) {
        ordered_json entry = ordered_json::object();
        entry["dtype"] = std::string(dtype_name(e.dtype));
        entry["shape"] = e.shape;
        entry["data_offsets"] = {e.begin, e.end};
        doc[e.name] = std::move(entry);
    }
    std::string text;
    try {
        text = doc.dump();
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError("header cannot be encoded as UTF-8 JSON: " + std::string(e.what()));
    }
    text.append((8 - text.size() % 8) % 8, ' ');
    return text;
}

CheckpointWriter::CheckpointWriter(const std::filesystem::path& path, std::vector<Layout> tensors,
                                   const std::map<std::string, std::string>& metadata)
    : path_(path) {
    std::sort(tensors.begin(), tensors.end(), [](const Layout& a, const Layout& b) { return a.name < b.name; });
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& t = tensors[i];
        if (t.name.empty()) throw ArgumentError("tensor name must be non-empty");
        if (t.name == kMetadataKey) throw ArgumentError("'__metadata__' is reserved");
        if (i > 0 && tensors[i - 1].name == t.name) throw ArgumentError("duplicate tensor name '" + t.name + "'");
        const std::uint64_t len = element_count(t.shape) * dtype_size(t.dtype);
        entries_.push_back(TensorMeta{t.name, t.dtype, std::move(t.shape), offset, offset + len});
        offset += len;
    }

    const std::string header = serialize_header(entries_, metadata);
    file_ = std::fopen(path.c_str(), "wb");
    if (file_ == nullptr) throw IoError("cannot create " + path.string() + ": " + errno_text());

    std::uint8_t prefix[8];
    std::uint64_t n = header.size();
    for (auto& b : prefix) {
        b = static_cast<std::uint8_t>(n & 0xFFu);
        n >>= 8;
    }
    write_raw(prefix, sizeof prefix);
    write_raw(header.data(), header.size());
    advance_past_empty();
}

CheckpointWriter::~CheckpointWriter() {
    if (file_ != nullptr) {
        std::fclose(file_);
        if (!finished_) {
            std::error_code ec;
            std::filesystem::remove(path_, ec);
        }
    }
}

void CheckpointWriter::write_raw(const void* data, std::size_t size) {
    if (size > 0 && std::fwrite(data, 1, size, file_) != size) {
        throw IoError("write failed on " + path_.string() + ": " + errno_text());
    }
}

void CheckpointWriter::advance_past_empty() {
    while (current_ < entries_.size() && written_in_current_ == entries_[current_].byte_length()) {
        ++current_;
        written_in_current_ = 0;
    }
}

void CheckpointWriter::append(std::span<const std::uint8_t> bytes) {
    while (!bytes.empty()) {
        if (current_ >= entries_.size()) throw ArgumentError("more payload than the layout declares");
        const auto& e = entries_[current_];
        const auto take = std::min<std::uint64_t>(bytes.size(), e.byte_length() - written_in_current_);
        write_raw(bytes.data(), take);
        written_in_current_ += take;
        bytes = bytes.subspan(take);
        advance_past_empty();
    }
}

void CheckpointWriter::append_f32(std::span<const float> values) {
    append({reinterpret_cast<const std::uint8_t*>(values.data()), values.size_bytes()});
}

void CheckpointWriter::finish() {
    if (finished_) return;
    if (current_ != entries_.size()) {
        throw ArgumentError("tensor '" + entries_[current_].name + "' was not fully written");
    }
    if (std::fflush(file_) != 0) throw IoError("flush failed on " + path_.string() + ": " + errno_text());
    const int rc = std::fclose(file_);
    file_ = nullptr;
    if (rc != 0) {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
        throw IoError("close failed on " + path_.string());
    }
    finished_ = true;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return CheckpointReader(path).read_all(); }

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::vector<CheckpointWriter::Layout> layout;
    layout.reserve(ckpt.size());
    for (const auto& t : ckpt.tensors()) layout.push_back({t.name, t.dtype, t.shape});
    CheckpointWriter writer(path, std::move(layout), ckpt.metadata);
    for (const auto& e : writer.entries()) writer.append(ckpt.at(e.name).bytes);
    writer.finish();
}

}  // namespace mergelab
