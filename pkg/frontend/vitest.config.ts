import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    environment: "node",
    // the integration test boots the Python service, which takes a moment
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
