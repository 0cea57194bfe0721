#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ois/common/errors.hpp"
#include "ois/common/mask.hpp"
#include "ois/io/png.hpp"
#include "ois/model/model.hpp"

namespace ois {

// Unknown or expired session id.
class SessionNotFound : public Error {
 public:
  using Error::Error;
};

// The request is valid but the session state forbids it (budget, undo at
// round 0).
class StateConflict : public Error {
 public:
  using Error::Error;
};

struct ClickOutcome {
  BinaryMask mask;
  Image8 order_map;  // 8-bit preview of the map for the new click
  int round = 0;     // index of the round just played
  std::optional<double> iou;
  double ms = 0.0;
};

struct SessionSummary {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<Click> clicks;
  std::vector<double> ious;  // empty without ground truth
  double encode_ms = 0.0;
  std::vector<double> click_ms;
  int encode_calls = 0;
  DepthProvenance depth = DepthProvenance::kFlat;
  bool has_gt = false;
};

// One image under annotation. The image is encoded exactly once, in the
// constructor; clicks reuse the cached features. Not thread-safe on its own:
// callers hold `mutex` for the whole request.
class Session {
 public:
  Session(std::string id, const OisModel<float>& model, const Tensor& image,
          DepthMap depth, std::optional<BinaryMask> gt);

  // Throws ValidationError out of bounds, StateConflict without a free slot.
  ClickOutcome AddClick(int x, int y, Polarity polarity);
  // Throws StateConflict at round 0.
  void Undo();
  SessionSummary Summary() const;

  int rounds() const { return static_cast<int>(clicks_.size()); }
  const ClickSet& clicks() const { return clicks_; }
  const std::optional<BinaryMask>& previous() const { return previous_; }

  std::mutex mutex;

 private:
  struct Snapshot {
    ClickSet clicks;
    std::optional<BinaryMask> previous;
  };

  std::string id_;
  const OisModel<float>& model_;
  FeatureMap<float> features_;
  DepthMap depth_;
  std::optional<BinaryMask> gt_;
  ClickSet clicks_;
  std::optional<BinaryMask> previous_;
  std::vector<Snapshot> undo_;
  std::vector<double> ious_;
  std::vector<double> click_ms_;
  double encode_ms_ = 0.0;
  int encode_calls_ = 0;
};

// Thread-safe id -> Session map with idle expiry. Expired sessions are
// dropped lazily on access and on every creation.
class SessionStore {
 public:
  using Clock = std::chrono::steady_clock;

  SessionStore(const OisModel<float>& model, std::chrono::milliseconds idle_timeout,
               std::function<Clock::time_point()> now = Clock::now);

  // Validates sizes (DimensionError on mismatch) and encodes the image.
  std::string Create(const Tensor& image, std::optional<DepthMap> depth,
                     std::optional<BinaryMask> gt);
  // Throws SessionNotFound; refreshes the idle timer.
  std::shared_ptr<Session> Acquire(const std::string& id);
  void ExpireIdle();
  std::size_t size() const;

 private:
  struct Entry {
    std::shared_ptr<Session> session;
    Clock::time_point last_access;
  };

  std::string NewId();

  const OisModel<float>& model_;
  std::chrono::milliseconds idle_timeout_;
  std::function<Clock::time_point()> now_;
  mutable std::mutex mutex_;
  std::map<std::string, Entry> sessions_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_;
};

}  // namespace ois
