#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace rwlp::service {

inline constexpr const char* kDefaultHost = "127.0.0.1";
inline constexpr int kDefaultPort = 8754;
inline constexpr std::size_t kMaxRequestPixels = 262144;

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// POST /api/propagate. Request:
///   {"width", "height", "numClasses", "entries": [{x, y, class}],
///    "boundary": [W*H numbers] (optional, zeros), "alpha": number (optional, 1.0)}
/// Response arrays carry float32-rounded values so they match the RWF1 files
/// written by `rwlp propagate` bit for bit.
Response handlePropagate(std::string_view body, std::string_view contentType);

/// GET /api/health.
Response handleHealth();

/// True for http(s)://localhost, 127.0.0.1 or [::1] origins, any port.
bool isLocalOrigin(std::string_view origin);

void installRoutes(httplib::Server& server);

/// Blocks serving until the server is stopped. Returns false if the address
/// could not be bound.
bool serve(const std::string& host, int port);

}  // namespace rwlp::service
