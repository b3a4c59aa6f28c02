import { defineConfig } from "vitest/config";

export default defineConfig({
  build: { outDir: "dist", sourcemap: true },
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8080",
      "/assets": "http://127.0.0.1:8080",
    },
  },
  test: {
    environment: "node",
    include: ["src/**/*.test.ts"],
  },
});
