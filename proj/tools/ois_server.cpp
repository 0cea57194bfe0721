#include <httplib.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>

#include "ois/model/checkpoint.hpp"
#include "ois/service/http_api.hpp"
#include "ois/service/session.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Interactive segmentation session server"};
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  double idle_timeout_s = 900.0;
  std::string static_dir;
  bool untrained = false;
  app.add_option("--checkpoint", checkpoint, "Model checkpoint to serve")
      ->envname("OIS_CHECKPOINT");
  app.add_flag("--untrained", untrained,
               "Serve a randomly initialized model (API smoke tests only)");
  app.add_option("--host", host, "Bind address")->envname("OIS_HOST");
  app.add_option("--port", port, "Port")->envname("OIS_PORT")->check(CLI::Range(0, 65535));
  app.add_option("--idle-timeout", idle_timeout_s,
                 "Seconds before an idle session expires")
      ->envname("OIS_IDLE_TIMEOUT")
      ->check(CLI::PositiveNumber);
  app.add_option("--static", static_dir, "Directory served at / (UI bundle)")
      ->check(CLI::ExistingDirectory);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (checkpoint.empty() && !untrained) {
    std::fprintf(stderr, "error: --checkpoint is required (or pass --untrained)\n");
    return 1;
  }

  try {
    const ois::OisModel<float> model =
        untrained ? ois::OisModel<float>(ois::ModelConfig{}, 0)
                  : ois::ModelFromCheckpoint(ois::LoadCheckpoint(checkpoint));
    ois::SessionStore store(
        model, std::chrono::milliseconds(static_cast<long long>(idle_timeout_s * 1000)));
    httplib::Server server;
    ois::RegisterRoutes(server, store);
    if (!static_dir.empty()) server.set_mount_point("/", static_dir);
    std::printf("listening on http://%s:%d\n", host.c_str(), port);
    std::fflush(stdout);
    if (!server.listen(host, port)) {
      std::fprintf(stderr, "error: cannot listen on %s:%d\n", host.c_str(), port);
      return 2;
    }
  } catch (const ois::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ois::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
