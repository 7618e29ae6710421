#pragma once

#include <string>
#include <thread>

#include <httplib.h>

// Local HTTP server on an ephemeral port for exercising remote clients.
class StubServer {
 public:
  httplib::Server server;

  int start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
    return port_;
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  ~StubServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  int port_ = 0;
  std::thread thread_;
};
