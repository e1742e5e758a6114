import { defineConfig } from "vitest/config";

export default defineConfig({
  build: {
    outDir: "dist",
    emptyOutDir: true,
  },
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the end-to-end test boots the Python study server
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
