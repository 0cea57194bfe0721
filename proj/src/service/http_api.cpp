#include "ois/service/http_api.hpp"

#include <httplib.h>

#include "ois/order/pfm.hpp"
#include "ois/service/codec.hpp"

namespace ois {

using nlohmann::json;

namespace {

const char* KindFor(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 404: return "not_found";
    case 409: return "conflict";
    case 422: return "unprocessable";
    default: return "internal";
  }
}

// Malformed request body or undecodable payload.
class BadRequest : public Error {
 public:
  using Error::Error;
};

json ParseBody(const httplib::Request& req) {
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw BadRequest("request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw BadRequest(std::string("malformed JSON: ") + e.what());
  }
}

std::string DecodeField(const json& body, const char* key) {
  if (!body.at(key).is_string()) {
    throw BadRequest(std::string(key) + " must be a base64 string");
  }
  try {
    return Base64Decode(body.at(key).get<std::string>());
  } catch (const ValidationError& e) {
    throw BadRequest(std::string(key) + ": " + e.what());
  }
}

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

const char* ProvenanceName(DepthProvenance p) {
  switch (p) {
    case DepthProvenance::kSynthetic: return "synthetic";
    case DepthProvenance::kFile: return "file";
    case DepthProvenance::kFlat: return "flat";
  }
  return "flat";
}

json ClickToJson(const Click& c) {
  return {{"x", c.x},
          {"y", c.y},
          {"polarity", c.polarity == Polarity::kPositive ? "positive" : "negative"},
          {"round", c.round}};
}

// Runs `fn` and turns library exceptions into enveloped error replies.
template <typename Fn>
void Guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    const int status = StatusFor(e);
    Reply(res, status, ErrorEnvelope(status, e.what()));
  }
}

void CreateSession(SessionStore& store, const httplib::Request& req,
                   httplib::Response& res) {
  const json body = ParseBody(req);
  if (!body.contains("image_png")) throw BadRequest("image_png is required");
  Tensor image;
  try {
    image = ImageToTensor(DecodePng(DecodeField(body, "image_png")));
  } catch (const DataError& e) {
    throw BadRequest(std::string("image_png: ") + e.what());
  }
  std::optional<DepthMap> depth;
  if (body.contains("depth_pfm") && !body.at("depth_pfm").is_null()) {
    try {
      depth = DepthMap{DecodePfm(DecodeField(body, "depth_pfm")),
                       DepthProvenance::kFile};
    } catch (const DataError& e) {
      throw BadRequest(std::string("depth_pfm: ") + e.what());
    }
  }
  std::optional<BinaryMask> gt;
  if (body.contains("gt_png") && !body.at("gt_png").is_null()) {
    try {
      gt = ImageToMask(DecodePng(DecodeField(body, "gt_png")));
    } catch (const DataError& e) {
      throw BadRequest(std::string("gt_png: ") + e.what());
    }
  }
  const std::string id = store.Create(image, std::move(depth), std::move(gt));
  const std::shared_ptr<Session> session = store.Acquire(id);
  std::lock_guard<std::mutex> lock(session->mutex);
  Reply(res, 201, OkEnvelope(SummaryToJson(session->Summary())));
}

void PostClick(SessionStore& store, const httplib::Request& req,
               httplib::Response& res) {
  const std::shared_ptr<Session> session = store.Acquire(req.path_params.at("id"));
  const json body = ParseBody(req);
  int x = 0, y = 0;
  std::string pol;
  try {
    x = body.at("x").get<int>();
    y = body.at("y").get<int>();
    pol = body.at("polarity").get<std::string>();
  } catch (const json::exception& e) {
    throw BadRequest(std::string("click needs integer x, y and a polarity: ") +
                     e.what());
  }
  if (pol != "positive" && pol != "negative") {
    throw BadRequest("polarity must be 'positive' or 'negative'");
  }
  std::lock_guard<std::mutex> lock(session->mutex);
  const ClickOutcome out = session->AddClick(
      x, y, pol == "positive" ? Polarity::kPositive : Polarity::kNegative);
  Reply(res, 200, OkEnvelope(OutcomeToJson(out)));
}

void PostUndo(SessionStore& store, const httplib::Request& req,
              httplib::Response& res) {
  const std::shared_ptr<Session> session = store.Acquire(req.path_params.at("id"));
  std::lock_guard<std::mutex> lock(session->mutex);
  session->Undo();
  Reply(res, 200, OkEnvelope(SummaryToJson(session->Summary())));
}

void GetSession(SessionStore& store, const httplib::Request& req,
                httplib::Response& res) {
  const std::shared_ptr<Session> session = store.Acquire(req.path_params.at("id"));
  std::lock_guard<std::mutex> lock(session->mutex);
  Reply(res, 200, OkEnvelope(SummaryToJson(session->Summary())));
}

}  // namespace

int StatusFor(const std::exception& e) {
  if (dynamic_cast<const BadRequest*>(&e) != nullptr) return 400;
  if (dynamic_cast<const SessionNotFound*>(&e) != nullptr) return 404;
  if (dynamic_cast<const StateConflict*>(&e) != nullptr) return 409;
  if (dynamic_cast<const CapacityError*>(&e) != nullptr) return 409;
  if (dynamic_cast<const DimensionError*>(&e) != nullptr) return 422;
  if (dynamic_cast<const ValidationError*>(&e) != nullptr) return 422;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 400;
  return 500;
}

json ErrorEnvelope(int status, const std::string& message) {
  return {{"ok", false},
          {"error", {{"status", status}, {"kind", KindFor(status)}, {"message", message}}}};
}

json OkEnvelope(json data) { return {{"ok", true}, {"data", std::move(data)}}; }

json SummaryToJson(const SessionSummary& s) {
  json clicks = json::array();
  for (const Click& c : s.clicks) clicks.push_back(ClickToJson(c));
  json j = {{"id", s.id},
            {"width", s.width},
            {"height", s.height},
            {"rounds", s.clicks.size()},
            {"clicks", clicks},
            {"depth", ProvenanceName(s.depth)},
            {"has_gt", s.has_gt},
            {"encode_calls", s.encode_calls},
            {"timings", {{"encode_ms", s.encode_ms}, {"click_ms", s.click_ms}}}};
  if (s.has_gt) j["iou_trace"] = s.ious;
  return j;
}

json OutcomeToJson(const ClickOutcome& out) {
  json j = {{"round", out.round},
            {"mask", RleToJson(EncodeRle(out.mask))},
            {"order_map_png", Base64Encode(EncodePng(out.order_map))},
            {"ms", out.ms}};
  if (out.iou) j["iou"] = *out.iou;
  return j;
}

void RegisterRoutes(httplib::Server& server, SessionStore& store) {
  server.Post("/sessions", [&store](const httplib::Request& req,
                                    httplib::Response& res) {
    Guarded(res, [&] { CreateSession(store, req, res); });
  });
  server.Post("/sessions/:id/clicks", [&store](const httplib::Request& req,
                                               httplib::Response& res) {
    Guarded(res, [&] { PostClick(store, req, res); });
  });
  server.Post("/sessions/:id/undo", [&store](const httplib::Request& req,
                                             httplib::Response& res) {
    Guarded(res, [&] { PostUndo(store, req, res); });
  });
  server.Get("/sessions/:id", [&store](const httplib::Request& req,
                                       httplib::Response& res) {
    Guarded(res, [&] { GetSession(store, req, res); });
  });
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const int status = res.status;
    res.set_content(ErrorEnvelope(status, status == 404 ? "no such route"
                                                        : "request failed")
                        .dump(),
                    "application/json");
  });
}

}  // namespace ois
