import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // The e2e file drives a live training service; its own hooks set wider
    // per-test timeouts where needed.
    testTimeout: 15000,
    hookTimeout: 300000,
  },
});
