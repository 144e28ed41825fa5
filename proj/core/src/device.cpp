#include "htsm/device.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <unistd.h>

namespace htsm {

void DeviceProfile::validate() const {
  if (seek_cost < 0.0) throw Error("seek_cost must be >= 0");
  if (bandwidth <= 0.0) throw Error("bandwidth must be > 0");
  if (alignment < 4096) throw Error("alignment floor is 4096 bytes");
}

std::vector<std::vector<IoRequest>> dispatch(
    std::span<const Extent> extents, std::span<const DataUnitKey> origin_keys,
    std::uint32_t device_count) {
  if (device_count == 0) throw Error("device_count must be >= 1");
  if (!origin_keys.empty() && origin_keys.size() != extents.size())
    throw Error("origin keys must parallel extents");

  std::vector<std::vector<IoRequest>> per_device(device_count);
  for (std::size_t i = 0; i < extents.size(); ++i) {
    const std::uint32_t dev = static_cast<std::uint32_t>(i % device_count);
    IoRequest req;
    req.device_id = dev;
    req.offset = extents[i].offset;
    req.length = extents[i].length;
    if (!origin_keys.empty()) req.origins.push_back(origin_keys[i]);
    per_device[dev].push_back(std::move(req));
  }
  for (auto& reqs : per_device)
    std::stable_sort(reqs.begin(), reqs.end(),
                     [](const IoRequest& a, const IoRequest& b) {
                       return a.offset < b.offset;
                     });
  return per_device;
}

std::vector<IoRequest> coalesce(std::span<const IoRequest> requests) {
  std::vector<IoRequest> out;
  for (const IoRequest& req : requests) {
    if (req.length == 0) throw Error("zero-length request");
    if (!out.empty()) {
      IoRequest& tail = out.back();
      if (req.device_id != tail.device_id)
        throw Error("coalesce input spans devices");
      if (req.offset < tail.offset)
        throw Error("coalesce input not offset-sorted");
      if (req.offset < tail.offset + tail.length)
        throw Error("overlapping requests in coalesce input");
      if (req.offset == tail.offset + tail.length) {
        tail.length += req.length;
        tail.origins.insert(tail.origins.end(), req.origins.begin(),
                            req.origins.end());
        continue;
      }
    }
    out.push_back(req);
  }
  // Dedup origin keys per merged request.
  for (IoRequest& req : out) {
    std::sort(req.origins.begin(), req.origins.end());
    req.origins.erase(std::unique(req.origins.begin(), req.origins.end()),
                      req.origins.end());
  }
  return out;
}

DeviceArray::DeviceArray(DeviceProfile profile, std::uint32_t device_count)
    : profile_(profile), clocks_(device_count, 0.0) {
  profile_.validate();
  if (device_count == 0) throw Error("device_count must be >= 1");
  stats_.per_device.resize(device_count);
}

DeviceArray::~DeviceArray() {
  if (fd_ >= 0) ::close(fd_);
}

void DeviceArray::attach_file(const std::filesystem::path& path) {
  if (fd_ >= 0) ::close(fd_);
  fd_ = ::open(path.c_str(), O_RDONLY);
  if (fd_ < 0)
    throw Error("cannot open backing file " + path.string() + ": " +
                std::strerror(errno));
  file_size_ = std::filesystem::file_size(path);
}

std::vector<std::uint8_t> DeviceArray::read_payload(const IoRequest& req) {
  std::vector<std::uint8_t> buf(req.length, 0);
  if (fd_ < 0) return buf;  // zero-filled backend
  if (req.offset + req.length > file_size_)
    throw Error("read past end of file on device " +
                std::to_string(req.device_id) + " at offset " +
                std::to_string(req.offset));
  std::size_t done = 0;
  while (done < req.length) {
    const ssize_t n =
        ::pread(fd_, buf.data() + done, req.length - done,
                static_cast<off_t>(req.offset + done));
    if (n < 0)
      throw Error("read failed on device " + std::to_string(req.device_id) +
                  " at offset " + std::to_string(req.offset) + ": " +
                  std::strerror(errno));
    if (n == 0)
      throw Error("short read on device " + std::to_string(req.device_id) +
                  " at offset " + std::to_string(req.offset));
    done += static_cast<std::size_t>(n);
  }
  return buf;
}

DeviceArray::Completion DeviceArray::execute(
    const std::vector<std::vector<IoRequest>>& per_device) {
  if (per_device.size() > clocks_.size())
    throw Error("request targets unknown device");

  Completion result;
  double finished = 0.0;
  for (std::size_t d = 0; d < per_device.size(); ++d) {
    std::uint64_t prev_end = 0;
    bool first = true;
    for (const IoRequest& req : per_device[d]) {
      if (req.device_id != d) throw Error("request device mismatch");
      if (req.length == 0) throw Error("zero-length request");
      if (req.offset % profile_.alignment != 0)
        throw Error("unaligned request offset " + std::to_string(req.offset));
      if (!first && req.offset < prev_end)
        throw Error("requests overlap or are unsorted on device " +
                    std::to_string(d));
      first = false;
      prev_end = req.offset + req.length;

      clocks_[d] += profile_.seek_cost +
                    static_cast<double>(req.length) / profile_.bandwidth;
      stats_.request_count += 1;
      stats_.bytes_read += req.length;
      stats_.per_device[d].requests += 1;
      stats_.per_device[d].bytes += req.length;
      stats_.per_device[d].busy_seconds = clocks_[d];

      result.payloads.push_back(read_payload(req));
      result.requests.push_back(req);
    }
    if (!per_device[d].empty()) finished = std::max(finished, clocks_[d]);
  }
  stats_.sim_time = *std::max_element(clocks_.begin(), clocks_.end());
  result.finished_at = finished;  // 0 when the batch was empty
  return result;
}

}  // namespace htsm
