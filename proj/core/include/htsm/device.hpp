#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "htsm/catalog.hpp"
#include "htsm/types.hpp"

namespace htsm {

/// Cost model of one storage device: a flat positioning charge per request
/// plus transfer at a fixed bandwidth. Rotational latency is folded into
/// seek_cost.
struct DeviceProfile {
  double seek_cost = 0.0;        // seconds per request
  double bandwidth = 1.0;        // bytes per second
  std::uint64_t alignment = 4096;

  static DeviceProfile hdd() { return {0.005, 150.0 * 1000 * 1000, 4096}; }
  static DeviceProfile ssd() { return {0.00002, 2000.0 * 1000 * 1000, 4096}; }

  void validate() const;
};

/// One pending positional read.
struct IoRequest {
  std::uint32_t device_id = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::vector<DataUnitKey> origins;  // units served by this request
};

struct PerDeviceStats {
  std::uint64_t requests = 0;
  std::uint64_t bytes = 0;
  double busy_seconds = 0.0;
};

struct IoStats {
  std::uint64_t request_count = 0;
  std::uint64_t bytes_read = 0;
  double sim_time = 0.0;  // max device busy clock
  std::vector<PerDeviceStats> per_device;
};

/// Assigns extents to devices round-robin in input order and sorts each
/// device's requests by offset. origin_keys, when nonempty, must parallel
/// extents and tags each request with the unit it serves.
std::vector<std::vector<IoRequest>> dispatch(
    std::span<const Extent> extents, std::span<const DataUnitKey> origin_keys,
    std::uint32_t device_count);

inline std::vector<std::vector<IoRequest>> dispatch(
    std::span<const Extent> extents, std::uint32_t device_count) {
  return dispatch(extents, {}, device_count);
}

/// Merges maximal runs of byte-adjacent requests of one device. Input must
/// be offset-sorted and non-overlapping; origin key sets are unioned and
/// total bytes are preserved.
std::vector<IoRequest> coalesce(std::span<const IoRequest> requests);

/// The disk-array stand-in: executes per-device request lists against a
/// simulated cost model, sourcing bytes from an attached file or zero-fill.
/// Each device has an independent busy clock; a batch completes when the
/// slowest involved device finishes.
class DeviceArray {
 public:
  DeviceArray(DeviceProfile profile, std::uint32_t device_count);
  ~DeviceArray();

  DeviceArray(const DeviceArray&) = delete;
  DeviceArray& operator=(const DeviceArray&) = delete;

  /// Back reads with positional reads from a real file.
  void attach_file(const std::filesystem::path& path);

  struct Completion {
    std::vector<std::vector<std::uint8_t>> payloads;  // one per request, flat
    std::vector<IoRequest> requests;                  // flattened, exec order
    double finished_at = 0.0;
  };

  /// Runs every request, advancing device clocks and stats. Requests must be
  /// offset-aligned to the profile's alignment floor.
  Completion execute(const std::vector<std::vector<IoRequest>>& per_device);

  const IoStats& stats() const { return stats_; }
  const DeviceProfile& profile() const { return profile_; }
  std::uint32_t device_count() const {
    return static_cast<std::uint32_t>(clocks_.size());
  }

 private:
  std::vector<std::uint8_t> read_payload(const IoRequest& req);

  DeviceProfile profile_;
  std::vector<double> clocks_;
  IoStats stats_;
  int fd_ = -1;
  std::uint64_t file_size_ = 0;
};

}  // namespace htsm
