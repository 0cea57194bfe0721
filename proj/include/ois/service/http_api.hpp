#pragma once

#include <string>

#include <json.hpp>

#include "ois/service/session.hpp"

namespace httplib {
class Server;
}

namespace ois {

// Status code for a library exception raised while serving a request.
int StatusFor(const std::exception& e);

// {"ok": false, "error": {"status", "kind", "message"}}
nlohmann::json ErrorEnvelope(int status, const std::string& message);
// {"ok": true, "data": data}
nlohmann::json OkEnvelope(nlohmann::json data);

nlohmann::json SummaryToJson(const SessionSummary& summary);
nlohmann::json OutcomeToJson(const ClickOutcome& outcome);

// Registers the session routes on `server`:
//   POST /sessions, POST /sessions/:id/clicks, POST /sessions/:id/undo,
//   GET /sessions/:id
// plus JSON envelopes for unmatched routes and uncaught errors.
void RegisterRoutes(httplib::Server& server, SessionStore& store);

}  // namespace ois
