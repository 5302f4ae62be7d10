import rclpy
from rclpy.node import Node
from sensor_msgs.msg import PointCloud2
from sensor_msgs.msg import LaserScan
from ObjectDetection.ObjectDetection import ObjectDetection


class ObjectDetection_node(Node):
    def __init__(self):
        super().__init__('ObjectDetection_node')
        self.ObjectDetection = ObjectDetection()
        self.point_cloud = None
        self.point_cloud_subscriber = self.create_subscription(PointCloud2, "/carla/ego_vehicle/lidar", self.point_cloud_callback, qos_profile=10)
        self.obstacle_distance_publisher = self.create_publisher(LaserScan, "/scan", qos_profile=10)
        self.timer = self.create_timer(1.0/20.0, self.execute)

    def point_cloud_callback(self, data):
        self.point_cloud = data.data

    def execute(self):
        if self.point_cloud is None:
            self.get_logger().warn("msg not received")
            return
        output = self.ObjectDetection.execute(point_cloud=self.point_cloud)
        obstacle_distance_msg = LaserScan()
        obstacle_distance_msg.range_min = output['obstacle_distance']
        self.obstacle_distance_publisher.publish(obstacle_distance_msg)


def main(args=None):
    rclpy.init(args=args)
    node = ObjectDetection_node()
    rclpy.spin(node)
    node.destroy_node()
    rclpy.shutdown()


if __name__ == '__main__':
    main()
