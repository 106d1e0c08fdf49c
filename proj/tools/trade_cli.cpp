#include <cstdio>

int main() {
  std::puts("trade cli: not wired up yet");
  return 2;
}
