import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    // live-service tests spawn one uvicorn process each; run files serially
    fileParallelism: false,
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
