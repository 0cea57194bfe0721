#include "ois/service/session.hpp"

#include <cstdio>
#include <random>

#include "ois/simharness/protocol.hpp"

namespace ois {

namespace {

using Clock = std::chrono::steady_clock;

double MillisSince(Clock::time_point start) {
  return std::max(
      std::chrono::duration<double, std::milli>(Clock::now() - start).count(), 1e-6);
}

Image8 OrderPreview(const OrderMap& map) {
  Image8 img;
  img.width = static_cast<int>(map.values.dim(1));
  img.height = static_cast<int>(map.values.dim(0));
  img.channels = 1;
  img.data.resize(map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    img.data[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(map.values[i], 0.0f, 1.0f) * 255.0f));
  }
  return img;
}

}  // namespace

Session::Session(std::string id, const OisModel<float>& model,
                 const Tensor& image, DepthMap depth,
                 std::optional<BinaryMask> gt)
    : id_(std::move(id)), model_(model), depth_(std::move(depth)), gt_(std::move(gt)) {
  const auto start = Clock::now();
  features_ = model_.EncodeImage(image, depth_);
  encode_ms_ = MillisSince(start);
  ++encode_calls_;
}

ClickOutcome Session::AddClick(int x, int y, Polarity polarity) {
  const int width = features_.image_width, height = features_.image_height;
  if (x < 0 || y < 0 || x >= width || y >= height) {
    throw ValidationError("click (" + std::to_string(x) + ", " +
                          std::to_string(y) + ") outside the image");
  }
  if (!clicks_.HasRoom(polarity)) {
    throw StateConflict("no free slot for another " +
                        std::string(polarity == Polarity::kPositive ? "positive"
                                                                     : "negative") +
                        " click");
  }
  const Click click{x, y, polarity, rounds()};
  Snapshot snapshot{clicks_, previous_};
  ClickSet next = clicks_;
  next.Add(click);

  const auto start = Clock::now();
  BinaryMask mask = model_.Predict(features_, next, depth_,
                                   previous_ ? &*previous_ : nullptr);
  const double ms = MillisSince(start);

  const OrderNormalization mode = model_.config().order_normalization;
  const OrderMap map = polarity == Polarity::kPositive
                           ? PositiveOrderMap(depth_, next, mode)
                           : NegativeOrderMap(depth_, click, mode);

  ClickOutcome out;
  out.round = click.round;
  out.ms = ms;
  out.order_map = OrderPreview(map);
  if (gt_) out.iou = Iou(mask, *gt_);

  undo_.push_back(std::move(snapshot));
  clicks_ = std::move(next);
  previous_ = mask;
  click_ms_.push_back(ms);
  if (out.iou) ious_.push_back(*out.iou);
  out.mask = std::move(mask);
  return out;
}

void Session::Undo() {
  if (undo_.empty()) throw StateConflict("nothing to undo at round 0");
  clicks_ = std::move(undo_.back().clicks);
  previous_ = std::move(undo_.back().previous);
  undo_.pop_back();
  click_ms_.pop_back();
  if (gt_) ious_.pop_back();
}

SessionSummary Session::Summary() const {
  SessionSummary s;
  s.id = id_;
  s.width = features_.image_width;
  s.height = features_.image_height;
  s.clicks = clicks_.history();
  s.ious = ious_;
  s.encode_ms = encode_ms_;
  s.click_ms = click_ms_;
  s.encode_calls = encode_calls_;
  s.depth = depth_.provenance;
  s.has_gt = gt_.has_value();
  return s;
}

SessionStore::SessionStore(const OisModel<float>& model,
                           std::chrono::milliseconds idle_timeout,
                           std::function<Clock::time_point()> now)
    : model_(model), idle_timeout_(idle_timeout), now_(std::move(now)),
      salt_(std::random_device{}()) {}

std::string SessionStore::NewId() {
  std::lock_guard<std::mutex> lock(mutex_);
  std::mt19937_64 rng(salt_ ^ (++counter_ * 0x9e3779b97f4a7c15ull));
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(counter_));
  return buf;
}

std::string SessionStore::Create(const Tensor& image, std::optional<DepthMap> depth,
                                 std::optional<BinaryMask> gt) {
  ExpireIdle();
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw DimensionError("image must be H x W x 3");
  }
  const int height = static_cast<int>(image.dim(0));
  const int width = static_cast<int>(image.dim(1));
  const int patch = model_.config().patch_size;
  if (width % patch != 0 || height % patch != 0) {
    throw DimensionError("image sides must be multiples of " + std::to_string(patch));
  }
  if (depth) {
    depth->Validate();
    if (depth->width() != width || depth->height() != height) {
      throw DimensionError("depth map size does not match the image");
    }
  } else {
    depth = DepthMap::Flat(width, height);
  }
  if (gt && (gt->width != width || gt->height != height)) {
    throw DimensionError("ground-truth mask size does not match the image");
  }
  std::string id = NewId();
  auto session = std::make_shared<Session>(id, model_, image, std::move(*depth),
                                           std::move(gt));
  std::lock_guard<std::mutex> lock(mutex_);
  sessions_[id] = Entry{std::move(session), now_()};
  return id;
}

std::shared_ptr<Session> SessionStore::Acquire(const std::string& id) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionNotFound("unknown session '" + id + "'");
  const auto now = now_();
  if (now - it->second.last_access > idle_timeout_) {
    sessions_.erase(it);
    throw SessionNotFound("session '" + id + "' expired");
  }
  it->second.last_access = now;
  return it->second.session;
}

void SessionStore::ExpireIdle() {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto now = now_();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second.last_access > idle_timeout_) {
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::size_t SessionStore::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return sessions_.size();
}

}  // namespace ois
