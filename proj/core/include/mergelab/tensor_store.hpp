#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mergelab/dtype.hpp"

namespace mergelab {

// Number of elements described by a shape (1 for a scalar, 0 when any
// dimension is 0).
std::uint64_t element_count(std::span<const std::uint64_t> shape) noexcept;

// Header entry of one tensor. `begin`/`end` are offsets into the data section.
struct TensorMeta {
    std::string name;
    Dtype dtype = Dtype::F32;
    std::vector<std::uint64_t> shape;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;

    std::uint64_t byte_length() const noexcept { return end - begin; }
    std::uint64_t numel() const noexcept { return element_count(shape); }
};

struct Tensor {
    std::string name;
    Dtype dtype = Dtype::F32;
    std::vector<std::uint64_t> shape;
    std::vector<std::uint8_t> bytes;

    std::uint64_t numel() const noexcept { return element_count(shape); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Named tensors plus string metadata. Insertion order is preserved (a
// checkpoint read from disk keeps header order); equality ignores order and
// compares names, dtypes, shapes, raw bytes and metadata.
class Checkpoint {
public:
    Checkpoint() = default;

    // Throws ArgumentError on duplicate name, empty name or when the byte
    // length does not match dtype and shape.
    void add(Tensor tensor);

    const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
    std::size_t size() const noexcept { return tensors_.size(); }
    bool empty() const noexcept { return tensors_.empty(); }

    bool contains(const std::string& name) const { return index_.contains(name); }
    const Tensor& at(const std::string& name) const;
    const Tensor* find(const std::string& name) const;

    std::map<std::string, std::string> metadata;

    friend bool operator==(const Checkpoint& a, const Checkpoint& b);

private:
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Flat float copy of a tensor's values.
std::vector<float> tensor_as_f32(const TensorMeta& meta, std::span<const std::uint8_t> bytes);
std::vector<float> tensor_as_f32(const Tensor& tensor);

// Random-access view over a checkpoint file. Only the header is parsed at
// open; tensor bytes are fetched on request with positional reads, so one
// reader may be shared between threads.
class CheckpointReader {
public:
    explicit CheckpointReader(const std::filesystem::path& path);
    ~CheckpointReader();

    CheckpointReader(const CheckpointReader&) = delete;
    CheckpointReader& operator=(const CheckpointReader&) = delete;
    CheckpointReader(CheckpointReader&& other) noexcept;
    CheckpointReader& operator=(CheckpointReader&& other) noexcept;

    const std::filesystem::path& path() const noexcept { return path_; }
    // Entries in header order.
    const std::vector<TensorMeta>& entries() const noexcept { return entries_; }
    const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }
    const TensorMeta& meta(const std::string& name) const;
    std::uint64_t data_offset() const noexcept { return data_offset_; }

    std::vector<std::uint8_t> read_bytes(const TensorMeta& meta) const;
    // Reads `out.size()` bytes starting `offset` bytes into the tensor.
    void read_range(const TensorMeta& meta, std::uint64_t offset, std::span<std::uint8_t> out) const;
    Tensor read_tensor(const std::string& name) const;

    Checkpoint read_all() const;

private:
    std::filesystem::path path_;
    int fd_ = -1;
    std::uint64_t file_size_ = 0;
    std::uint64_t data_offset_ = 0;
    std::vector<TensorMeta> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<std::string, std::string> metadata_;
};

// Streaming writer. The full tensor layout is fixed up front (sorted by name,
// contiguous ascending offsets); payloads are then appended in that order,
// possibly in several chunks per tensor.
class CheckpointWriter {
public:
    struct Layout {
        std::string name;
        Dtype dtype = Dtype::F32;
        std::vector<std::uint64_t> shape;
    };

    CheckpointWriter(const std::filesystem::path& path, std::vector<Layout> tensors,
                     const std::map<std::string, std::string>& metadata);
    ~CheckpointWriter();

    CheckpointWriter(const CheckpointWriter&) = delete;
    CheckpointWriter& operator=(const CheckpointWriter&) = delete;

    // Tensor order the payloads must follow.
    const std::vector<TensorMeta>& entries() const noexcept { return entries_; }

    // Appends bytes to the current tensor; moves to the next tensor once the
    // current one is complete. Throws ArgumentError on overrun.
    void append(std::span<const std::uint8_t> bytes);
    void append_f32(std::span<const float> values);

    // Verifies every tensor was fully written and flushes. Must be called;
    // the destructor of an unfinished writer removes the partial file.
    void finish();

private:
    std::filesystem::path path_;
    std::vector<TensorMeta> entries_;
    std::FILE* file_ = nullptr;
    std::size_t current_ = 0;
    std::uint64_t written_in_current_ = 0;
    bool finished_ = false;

    void write_raw(const void* data, std::size_t size);
    void advance_past_empty();
};

// Header bytes as written to disk: compact JSON padded with spaces to a
// multiple of 8.
std::string serialize_header(const std::vector<TensorMeta>& entries,
                             const std::map<std::string, std::string>& metadata);

Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

}  // namespace mergelab
